import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Tuple
from urllib.parse import urlparse

import numpy as np
from requests import Session

from congestion_flow.exceptions import GraphFormatError
from congestion_flow.graph import Graph
from congestion_flow.hierarchy import HierarchyApproximator
from congestion_flow.types import DemandVector, EdgeList, GraphFormat, Record, Source
from congestion_flow.utils import check_balanced

__all__ = ["FlowIO", "DimacsInstance", "load_graph", "load_demands"]

logger = logging.getLogger("congestion_flow")


class DimacsInstance(NamedTuple):
    """A DIMACS max-flow instance; source and sink are 0-indexed or None."""

    graph: Graph
    source: Optional[int]
    sink: Optional[int]


def _data_lines(text: str, comments: Tuple[str, ...]) -> List[Tuple[int, List[str]]]:
    """Non-blank, non-comment lines as (line number, tokens)."""
    out = []
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith(comments):
            continue
        out.append((number, stripped.split()))
    return out


def _vertex(token: str, number: int) -> int:
    try:
        vertex = int(token)
    except ValueError as e:
        raise GraphFormatError(f"line {number}: bad vertex id {token!r}") from e
    if vertex < 1:
        raise GraphFormatError(f"line {number}: vertex ids start at 1, got {vertex}")
    return vertex - 1


def _number(token: str, number: int) -> float:
    try:
        return float(token)
    except ValueError as e:
        raise GraphFormatError(f"line {number}: bad number {token!r}") from e


def _count(token: str, number: int) -> int:
    try:
        count = int(token)
    except ValueError as e:
        raise GraphFormatError(f"line {number}: bad count {token!r}") from e
    if count < 0:
        raise GraphFormatError(f"line {number}: negative count {count}")
    return count


def parse_edgelist(text: str) -> Graph:
    """Parse `u v cap` lines with 1-indexed vertices.

    `#` comments and blank lines are skipped. A `# n <count>` header fixes
    the vertex count, otherwise it is the largest vertex id.

    Raises:
        GraphFormatError: On malformed lines.
    """
    n_header: Optional[int] = None
    for line in text.splitlines():
        tokens = line.strip().lstrip("#").split()
        header = line.strip().startswith("#") and len(tokens) == 2 and tokens[0] == "n"
        if header and tokens[1].isdigit():
            n_header = int(tokens[1])
    edges: EdgeList = []
    for number, tokens in _data_lines(text, ("#",)):
        if len(tokens) != 3:
            raise GraphFormatError(
                f"line {number}: expected 'u v capacity', got {' '.join(tokens)!r}"
            )
        edges.append(
            (
                _vertex(tokens[0], number),
                _vertex(tokens[1], number),
                _number(tokens[2], number),
            )
        )
    largest = max((max(a, h) + 1 for a, h, _ in edges), default=1)
    n = n_header if n_header is not None else largest
    if n < largest:
        raise GraphFormatError(f"header declares n={n} but vertex {largest} is used")
    return Graph.from_edges(n, edges)


def parse_dimacs(text: str) -> DimacsInstance:
    """Parse the DIMACS max-flow format.

    `c` lines are comments, `p max n m` declares the size, `a u v cap` adds
    an undirected edge oriented u -> v and `n v s` / `n v t` name the source
    and sink.

    Raises:
        GraphFormatError: On malformed or missing lines.
    """
    n: Optional[int] = None
    declared_m = 0
    source: Optional[int] = None
    sink: Optional[int] = None
    edges: EdgeList = []
    for number, tokens in _data_lines(text, ("c",)):
        tag = tokens[0]
        if tag == "p":
            if len(tokens) != 4 or tokens[1] != "max":
                raise GraphFormatError(f"line {number}: expected 'p max n m'")
            n = _count(tokens[2], number)
            declared_m = _count(tokens[3], number)
        elif tag == "a":
            if n is None:
                raise GraphFormatError(f"line {number}: arc before the problem line")
            if len(tokens) != 4:
                raise GraphFormatError(f"line {number}: expected 'a u v capacity'")
            edges.append(
                (
                    _vertex(tokens[1], number),
                    _vertex(tokens[2], number),
                    _number(tokens[3], number),
                )
            )
        elif tag == "n":
            if len(tokens) != 3 or tokens[2] not in ("s", "t"):
                raise GraphFormatError(f"line {number}: expected 'n v s' or 'n v t'")
            if tokens[2] == "s":
                source = _vertex(tokens[1], number)
            else:
                sink = _vertex(tokens[1], number)
        else:
            raise GraphFormatError(f"line {number}: unknown line type {tag!r}")
    if n is None:
        raise GraphFormatError("missing problem line 'p max n m'")
    if declared_m != len(edges):
        logger.warning(f"problem line declares {declared_m} arcs, found {len(edges)}")
    if any(max(a, h) >= n for a, h, _ in edges):
        raise GraphFormatError(f"arc endpoint exceeds n={n}")
    return DimacsInstance(Graph.from_edges(n, edges), source, sink)


def parse_demands(text: str, n: int) -> DemandVector:
    """Parse `vertex value` lines (1-indexed); repeated vertices add up.

    Raises:
        GraphFormatError: On malformed lines or out of range vertices.
        DemandImbalanceError: If the demands do not sum to zero.
    """
    b = np.zeros(n)
    for number, tokens in _data_lines(text, ("#", "c")):
        if len(tokens) != 2:
            raise GraphFormatError(f"line {number}: expected 'vertex value'")
        vertex = _vertex(tokens[0], number)
        if vertex >= n:
            raise GraphFormatError(f"line {number}: vertex {vertex + 1} exceeds n={n}")
        b[vertex] += _number(tokens[1], number)
    check_balanced(b)
    return b


def format_edgelist(graph: Graph) -> str:
    lines = [f"# n {graph.n}"]
    lines += [f"{a + 1} {h + 1} {c!r}" for a, h, c in graph.edges()]
    return "\n".join(lines) + "\n"


def format_dimacs(
    graph: Graph, source: Optional[int] = None, sink: Optional[int] = None
) -> str:
    lines = [f"p max {graph.n} {graph.m}"]
    if source is not None:
        lines.append(f"n {source + 1} s")
    if sink is not None:
        lines.append(f"n {sink + 1} t")
    lines += [f"a {a + 1} {h + 1} {c!r}" for a, h, c in graph.edges()]
    return "\n".join(lines) + "\n"


def format_demands(b: DemandVector) -> str:
    lines = [f"{v + 1} {float(b[v])!r}" for v in np.flatnonzero(b)]
    return "\n".join(lines) + "\n"


class FlowIO:
    """Reads and writes instances, solutions and hierarchies.

    Local paths are read with `pathlib`, http(s) urls with `requests`.

    Args:
        headers (Optional[Dict[str, str]]):
            A dictionary of additional headers to use in all requests.
        params (Optional[Dict[str, str]]):
            A dictionary of additional query parameters to use in all requests.
    """

    def __init__(
        self,
        headers: Optional[Dict[str, str]] = None,
        params: Optional[Dict[str, str]] = None,
    ) -> None:
        self.headers = headers or {}
        self.params = params or {}

    def read_text(self, source: Source, **kwargs: Any) -> str:
        """Read `source` (path or url) as a UTF-8 string.

        Args:
            source (Source): Local path or http(s) url.
            kwargs: `headers`, `params` or `session` (a `requests.Session`),
                used only for urls.

        Raises:
            ValueError: Path incorrect or file not found.
            OSError: If a url cannot be fetched.
        """
        # Convert PathLike to str
        href = os.fspath(source)
        if urlparse(href).scheme not in ["http", "https"]:
            path = Path(href)
            if not path.is_file():
                raise ValueError(f"Path incorrect or file not found: {href}.")
            return path.read_text(encoding="utf-8")

        headers = kwargs.get("headers") or self.headers
        params = kwargs.get("params") or self.params
        session = kwargs.get("session", None)
        if session is not None:
            return self._request(session, href, headers, params)
        with Session() as s:
            try:
                return self._request(s, href, headers, params)
            except Exception as e:
                raise OSError(f"Could not read uri {href}") from e

    def _request(
        self,
        session: Session,
        href: str,
        headers: Dict[str, str],
        params: Dict[str, str],
    ) -> str:
        response = session.get(href, headers=headers, params=params)
        response.encoding = "utf-8"
        response.raise_for_status()
        return str(response.text)

    def write_text(self, dest: Source, txt: str) -> None:
        """Write a UTF-8 string to a local file, creating its directory.

        Raises:
            NotImplementedError: For urls.
        """
        href = os.fspath(dest)
        if urlparse(href).scheme in ["http", "https"]:
            raise NotImplementedError("Writing to remote files is not implemented")
        path = Path(href)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(txt, encoding="utf-8")

    def read_json(self, source: Source, **kwargs: Any) -> Record:
        text = self.read_text(source, **kwargs)
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise GraphFormatError(f"{os.fspath(source)} is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise GraphFormatError(f"{os.fspath(source)} does not hold a JSON object")
        return data

    def write_json(self, dest: Source, record: Record) -> None:
        self.write_text(dest, json.dumps(record, indent=2) + "\n")

    def read_graph(
        self, source: Source, fmt: Optional[GraphFormat] = None, **kwargs: Any
    ) -> Graph:
        """Read a graph; the format follows the suffix when `fmt` is None."""
        return self.read_instance(source, fmt, **kwargs).graph

    def read_instance(
        self, source: Source, fmt: Optional[GraphFormat] = None, **kwargs: Any
    ) -> DimacsInstance:
        """Read a graph with the source and sink it may declare."""
        fmt = fmt or guess_format(source)
        text = self.read_text(source, **kwargs)
        if fmt is GraphFormat.DIMACS:
            instance = parse_dimacs(text)
        else:
            instance = DimacsInstance(parse_edgelist(text), None, None)
        logger.debug(
            f"read {fmt.value} graph {os.fspath(source)}: "
            f"n={instance.graph.n}, m={instance.graph.m}"
        )
        return instance

    def write_graph(
        self, dest: Source, graph: Graph, fmt: Optional[GraphFormat] = None
    ) -> None:
        fmt = fmt or guess_format(dest)
        if fmt is GraphFormat.DIMACS:
            self.write_text(dest, format_dimacs(graph))
        else:
            self.write_text(dest, format_edgelist(graph))

    def read_demands(self, source: Source, n: int, **kwargs: Any) -> DemandVector:
        return parse_demands(self.read_text(source, **kwargs), n)

    def write_demands(self, dest: Source, b: DemandVector) -> None:
        self.write_text(dest, format_demands(b))

    def read_hierarchy(
        self, source: Source, graph: Graph, **kwargs: Any
    ) -> HierarchyApproximator:
        return HierarchyApproximator.from_dict(graph, self.read_json(source, **kwargs))

    def write_hierarchy(
        self, dest: Source, approximator: HierarchyApproximator
    ) -> None:
        self.write_json(dest, approximator.to_dict())


def guess_format(source: Source) -> GraphFormat:
    """DIMACS for `.dimacs`, `.max` and `.dmx` files, edge list otherwise."""
    suffix = Path(urlparse(os.fspath(source)).path).suffix.lower()
    if suffix in (".dimacs", ".max", ".dmx"):
        return GraphFormat.DIMACS
    return GraphFormat.EDGELIST


def load_graph(source: Source, fmt: Optional[GraphFormat] = None) -> Graph:
    """Read a graph file (edge list or DIMACS) into a validated `Graph`.

    Raises:
        ValueError: If the file is missing.
        GraphFormatError: On malformed content.
        InvalidCapacityError: On a nonpositive capacity.
        DisconnectedGraphError: If the graph is not connected.
    """
    return FlowIO().read_graph(source, fmt)


def load_demands(source: Source, n: int) -> DemandVector:
    """Read a demand file for a graph with `n` vertices."""
    return FlowIO().read_demands(source, n)
