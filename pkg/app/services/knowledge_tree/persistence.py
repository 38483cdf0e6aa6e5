"""
Tree persistence. Levels 1-2 live in the graph file; this writes level 3-4
(one community per line in tree.jsonl) and every index under indexes/.
"""

import json
import logging
from pathlib import Path
from typing import Union

from pydantic import ValidationError

from app.schemas.community import Community
from app.services.embeddings.index import IndexKind, load_index, save_index
from app.services.graph.persistence import dump_line
from app.services.graph.store import Graph
from app.services.knowledge_tree.builder import KnowledgeTree, tree_levels

logger = logging.getLogger(__name__)

TREE_FILE = "tree.jsonl"
INDEX_DIR = "indexes"


class TreeParseError(ValueError):
    pass


def save_tree(tree: KnowledgeTree, directory: Union[str, Path]) -> list[Path]:
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    written = []
    tree_path = root / TREE_FILE
    with open(tree_path, "w", encoding="utf-8", newline="\n") as f:
        for community in tree.communities:
            f.write(dump_line(community.model_dump()) + "\n")
    written.append(tree_path)
    for kind in IndexKind:
        if kind in tree.indexes:
            written.append(save_index(tree.indexes[kind], root / INDEX_DIR / f"{kind.value}.vec"))
    logger.info("Saved knowledge tree to %s (%d files)", root, len(written))
    return written


def load_tree(directory: Union[str, Path], graph: Graph) -> KnowledgeTree:
    root = Path(directory)
    communities: list[Community] = []
    with open(root / TREE_FILE, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                communities.append(Community.model_validate(json.loads(line)))
            except (json.JSONDecodeError, ValidationError) as exc:
                raise TreeParseError(f"{TREE_FILE} line {line_no}: {exc}") from exc

    indexes = {}
    for kind in IndexKind:
        path = root / INDEX_DIR / f"{kind.value}.vec"
        if path.exists():
            indexes[kind] = load_index(path)

    level2, level1 = tree_levels(graph)
    return KnowledgeTree(communities=communities, level2=level2, level1=level1, indexes=indexes)
