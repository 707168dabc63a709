from magnet.data.layout import (
	Dataset,
	DatasetMeta,
	LayoutTile,
	Obstacle,
	Pin,
	amplify_labels,
	binarize_truth,
	split_dataset,
)
from magnet.data.npy import load_npy, save_npy
from magnet.data.synth import SynthConfig, synth_generate
