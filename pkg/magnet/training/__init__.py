from magnet.training.checkpoint import Checkpoint, apply_checkpoint, load_checkpoint, save_checkpoint
from magnet.training.trainer import TrainConfig, TrainingHistory, stage1_pretrain, stage2_joint
