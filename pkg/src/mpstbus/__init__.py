"""Shared-memory multiparty session channels with two- and three-way linking."""
from .board import Board, BoardRef, Runtime, Stats, board_new, read, release, retain, try_read, write
from .endpoint import Endpoint, session_new
from .errors import *  # noqa: F401,F403
from .link import LinkOutcome, keep_receivers, kill_receivers, link2, link3
from .message import Label, Message, Pattern, mark_read, matches, matches_ctl
from .oracle import FlatSession, Oracle, oracle_step
from .roleset import MAX_ARITY, RoleSet, complement, intersect, is_subset, roles, union

__version__ = "0.1.0"
