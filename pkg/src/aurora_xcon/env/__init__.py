from .features import FEATURE_KINDS, RandomFeatureSpec, batch_features, extract_feature, feature_dim
from .maze import DriveParams, MazeWorld, RobotState, laser_cast, load_maze, maze_step, standard_maze
from .point_maze import PointMazeTask, point_maze_episode, u_maze
from .policy import PolicyNet
from .rollout import BatchEvaluation, EpisodeResult, MazeTask, PolicyError, run_episode

__all__ = [
    "FEATURE_KINDS", "RandomFeatureSpec", "batch_features", "extract_feature", "feature_dim",
    "DriveParams", "MazeWorld", "RobotState", "laser_cast", "load_maze", "maze_step", "standard_maze",
    "PointMazeTask", "point_maze_episode", "u_maze", "PolicyNet",
    "BatchEvaluation", "EpisodeResult", "MazeTask", "PolicyError", "run_episode",
]
