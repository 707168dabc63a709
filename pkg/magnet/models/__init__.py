from magnet.models.fusion import MagNet, Prediction, compare_models, magnet_forward, threshold_binarize, unet_forward
from magnet.models.gnn import TileGNN, gnn_forward, project_to_grid
from magnet.models.mdunet import MDUnet, UNetConfig
