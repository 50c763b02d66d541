"""Reader for WNdb-format taxonomies and Wu-Palmer similarity.

Only the pieces needed for word similarity are parsed: lemma -> synset
offsets from ``index.*`` and hypernym pointers (``@`` / ``@i``) from
``data.*``.  A compact pinned taxonomy ships with the package for
environments without a full WordNet database.
"""

from __future__ import annotations

from functools import lru_cache
from importlib import resources
from pathlib import Path


class Taxonomy:
    def __init__(self, lemma_to_synsets: dict, hypernyms: dict):
        self._lemmas = lemma_to_synsets
        self._hypernyms = hypernyms
        self._depth_cache: dict[str, int] = {}

    # -- construction -----------------------------------------------------

    @classmethod
    def load(cls, directory) -> "Taxonomy":
        directory = Path(directory)
        if not directory.is_dir():
            raise FileNotFoundError(f"taxonomy directory not found: {directory}")
        lemmas: dict[str, list[str]] = {}
        hypernyms: dict[str, list[str]] = {}
        found = False
        for pos in ("noun", "verb", "adj", "adv"):
            index_file = directory / f"index.{pos}"
            data_file = directory / f"data.{pos}"
            if not (index_file.is_file() and data_file.is_file()):
                continue
            found = True
            cls._parse_index(index_file, lemmas)
            cls._parse_data(data_file, hypernyms)
        if not found:
            raise ValueError(f"no index.*/data.* pairs under {directory}")
        return cls(lemmas, hypernyms)

    @classmethod
    def bundled(cls) -> "Taxonomy":
        """The compact taxonomy shipped under medvqa/data/mini_wordnet."""
        with resources.as_file(resources.files("medvqa.data") / "mini_wordnet") as p:
            return cls.load(p)

    @staticmethod
    def _parse_index(path: Path, lemmas: dict) -> None:
        with path.open(encoding="utf-8") as fh:
            for line in fh:
                if line.startswith(" ") or not line.strip():
                    continue
                fields = line.split()
                lemma = fields[0]
                count = int(fields[2])
                offsets = fields[-count:]
                lemmas.setdefault(lemma, []).extend(offsets)

    @staticmethod
    def _parse_data(path: Path, hypernyms: dict) -> None:
        with path.open(encoding="utf-8") as fh:
            for line in fh:
                if line.startswith(" ") or not line.strip():
                    continue
                body = line.split("|", 1)[0].split()
                offset = body[0]
                w_cnt = int(body[3], 16)
                pos = 4 + 2 * w_cnt
                p_cnt = int(body[pos])
                parents = []
                cursor = pos + 1
                for _ in range(p_cnt):
                    symbol, target = body[cursor], body[cursor + 1]
                    if symbol in ("@", "@i"):
                        parents.append(target)
                    cursor += 4
                hypernyms.setdefault(offset, []).extend(parents)

    # -- queries -----------------------------------------------------------

    def __contains__(self, word: str) -> bool:
        return word in self._lemmas

    def synsets(self, word: str) -> list[str]:
        return list(self._lemmas.get(word, ()))

    def depth(self, synset: str) -> int:
        """Node-counted depth from the root: a synset with no hypernyms has
        depth 1; otherwise 1 + max parent depth."""
        cached = self._depth_cache.get(synset)
        if cached is not None:
            return cached
        stack = [(synset, iter(self._hypernyms.get(synset, ())))]
        on_stack = {synset}
        best: dict[str, int] = {}
        while stack:
            node, parents = stack[-1]
            advanced = False
            for parent in parents:
                if parent in self._depth_cache:
                    continue
                if parent in on_stack:
                    continue  # defensive: a cycle would otherwise hang
                stack.append((parent, iter(self._hypernyms.get(parent, ()))))
                on_stack.add(parent)
                advanced = True
                break
            if advanced:
                continue
            stack.pop()
            on_stack.discard(node)
            ps = self._hypernyms.get(node, ())
            d = 1 + max((self._depth_cache.get(p, best.get(p, 0)) for p in ps), default=0)
            self._depth_cache[node] = d
            best[node] = d
        return self._depth_cache[synset]

    def _ancestor_distances(self, synset: str) -> dict:
        dist = {synset: 0}
        frontier = [synset]
        while frontier:
            nxt = []
            for node in frontier:
                for parent in self._hypernyms.get(node, ()):
                    if parent not in dist:
                        dist[parent] = dist[node] + 1
                        nxt.append(parent)
            frontier = nxt
        return dist

    def synset_wup(self, a: str, b: str) -> float:
        """2*depth(lcs) / (depth-through-lcs of a + of b); 0 without a common
        subsumer."""
        da = self._ancestor_distances(a)
        db = self._ancestor_distances(b)
        common = set(da) & set(db)
        if not common:
            return 0.0
        lcs = max(common, key=lambda s: (self.depth(s), s))
        depth = self.depth(lcs)
        return 2.0 * depth / ((da[lcs] + depth) + (db[lcs] + depth))

    def wup(self, word_a: str, word_b: str) -> float | None:
        """Best Wu-Palmer similarity over all synset pairs; None when either
        word is absent from the taxonomy."""
        sa, sb = self.synsets(word_a), self.synsets(word_b)
        if not sa or not sb:
            return None
        return max(self.synset_wup(x, y) for x in sa for y in sb)


@lru_cache(maxsize=1)
def bundled_taxonomy() -> Taxonomy:
    return Taxonomy.bundled()
