"""Segment-level topological mapping, localization and hop planning."""

from .errors import HopmapError, IngestError, PlanningError, QueryError
from .graph import (GraphConfig, MapEdge, MapGraph, MapNode, aggregate_descriptors,
                    build_inter_edges, build_intra_edges_complete,
                    build_intra_edges_delaunay, build_map, export_dot, load_map,
                    save_map)
from .ingest import (FrameMeta, FrameSet, SegmentRecord, build_frameset,
                     filter_small, filter_stuff, make_record, parse_frame_records,
                     read_vectors, write_frame_records, write_vectors)
from .localize import NodeMatch, eval_recall, localize_frame, localize_segments
from .planning import (Plan, PlanStrategy, RelationalQuery, plan, plan_cost,
                       resolve_relational_query, resolve_text_query)
from .control import ControlCommand, ControlParams, PidState, continuous_step, \
    discrete_step, pid_yaw
from .simworld import (AgentPose, TrialResult, World, WorldSpec, eval_association,
                       generate_world, mapping_traverse, observe,
                       run_navigation_trial, step_agent)

__version__ = "0.1.0"
