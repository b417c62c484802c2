from rich.markup import escape
from rich.tree import Tree

CHILDREN_KEY = "__children__"
TREE_NODE_STYLE = "yellow"
TREE_LEAF_ATTR_STYLE = "bold magenta"
TREE_LEAF_VALUE_STYLE = "green"


def format_loc(loc: tuple[str | int, ...]) -> str:
    parts: list[str] = []
    for item in loc:
        if isinstance(item, int):
            parts.append(f"[{item}]")
        else:
            if parts:
                parts.append(".")
            parts.append(item)
    return "".join(parts)


def merge_index_loc(loc: tuple[str | int, ...]) -> tuple[str, ...]:
    """Fold list indexes into the preceding key, ("roster", 0, "alpha") -> ("roster[0]", "alpha")"""
    new_loc: list[str] = []
    for item in loc:
        if isinstance(item, int):
            previous = new_loc.pop(-1) if new_loc else ""
            new_loc.append(f"{previous}[{item}]")
            continue
        new_loc.append(item)
    return tuple(new_loc)


def errors_to_tree(errors: list[dict]) -> dict:
    tree: dict = {}
    for error in errors:
        node = tree
        for key in merge_index_loc(tuple(error["loc"])):
            node = node.setdefault(key, {})
        node.setdefault(CHILDREN_KEY, []).append(error)
    return tree


def _enrich_tree(rich_tree: Tree, tree: dict):
    for key, value in tree.items():
        if key == CHILDREN_KEY:
            continue
        subtree = rich_tree.add(f"[{TREE_NODE_STYLE}]{escape(key)}[/{TREE_NODE_STYLE}]")
        _enrich_tree(subtree, value)
    for error in tree.get(CHILDREN_KEY, []):
        items = []
        for key in ("type", "msg"):
            if key not in error:
                continue
            items.append(
                f"[{TREE_LEAF_ATTR_STYLE}]{escape(key)}[/{TREE_LEAF_ATTR_STYLE}]"
            )
            items.append(
                f"[{TREE_LEAF_VALUE_STYLE}]{escape(str(error[key]))}[/{TREE_LEAF_VALUE_STYLE}]"
            )
        rich_tree.add(" ".join(items))


def enrich_tree(tree: dict) -> Tree:
    root = Tree(":cross_mark:")
    _enrich_tree(rich_tree=root, tree=tree)
    return root
