from .network import NetworkConfig, DualHeadNetwork, build_network, forward
from .params import ParamVector, ParamLayout, get_params, set_params, layout_of
from .checkpoint import save_checkpoint, load_checkpoint, read_checkpoint
