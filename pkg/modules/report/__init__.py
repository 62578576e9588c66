from .plots import plot_weights, plot_training_dice
from .previews import overlay, tile, save_png, mid_slice
