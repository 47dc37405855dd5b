from src.models.gcn import Gcn, gcn_forward
from src.models.labelwise import (
    ClassAdjacency,
    LabelWiseGnn,
    LabelWiseLayer,
    LayerActivations,
    build_class_adjacency,
    labelwise_layer,
    lwgnn_forward,
)
from src.models.mlp import LabelAssignment, PseudoLabelMlp, assign_labels, mlp_forward
from src.models.selector import SelectionWeights, combine_predictions
