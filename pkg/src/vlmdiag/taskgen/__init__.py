"""Synthetic graph-coloring and Sudoku tasks with exact perception ground truth."""

from .dataset import read_dataset, write_dataset
from .graphs import GraphInstance, MAX_NODES, chromatic_number, find_coloring, gen_graph, optimal_coloring
from .instances import TaskInstance, canonical_of, generate_tasks, make_task
from .perception import CanonicalPerception, EdgeList, GivensGrid, TaskKind
from .render import decode_document, render
from .sudoku import SudokuInstance, count_solutions, gen_sudoku, is_valid_solution, solve

__all__ = [
    "CanonicalPerception", "EdgeList", "GivensGrid", "GraphInstance", "MAX_NODES",
    "SudokuInstance", "TaskInstance", "TaskKind", "canonical_of", "chromatic_number",
    "count_solutions", "decode_document", "find_coloring", "gen_graph", "gen_sudoku",
    "generate_tasks", "is_valid_solution", "make_task", "optimal_coloring", "read_dataset",
    "render", "solve", "write_dataset",
]
