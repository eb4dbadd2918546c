"""Shipped default settings.

These are the values every operation falls back to when the caller does not
override them. The settings test pins each one, so changing a default here is
an interface change, not a tweak.
"""

# Shock label threshold: a move of at least 5% in either direction.
SBL_TAU = 0.05

# Index label majority parameter must fall in this range.
IBL_K_CHOICES = (3, 4, 5)

# Longest calendar gap allowed when searching for an adjacent trading day.
MAX_NEIGHBOR_GAP_DAYS = 7

# Co-occurrence window for building a graph from a token stream.
GRAPH_WINDOW = 3

# Propagation steps of the gated graph network.
GNN_HOPS = 2

# Dimension of the initial word vectors attached to graph nodes.
NODE_FEATURE_DIM = 300

# Graph-level embedding produced by the gated aggregation.
GRAPH_EMBEDDING_DIM = 96

# Minibatch size for every trained model.
BATCH_SIZE = 128

# Document-embedding (PV-DM) training settings.
DOCEMBED_LR = 0.001
DOCEMBED_NEGATIVES = 5
DOCEMBED_MIN_COUNT = 2
DOCEMBED_DIMS = (100, 200, 300)
DOCEMBED_WINDOW = 5

# Hidden width of the one-hidden-layer MLP classifier, keyed by input
# feature dimension; fundamentals (sales/EPS) features use the small width.
MLP_HIDDEN_BY_DIM = {100: 32, 200: 64, 300: 128}
SE_MLP_HIDDEN = 16

# Year-based split: train on everything up to and including this year,
# evaluate on the one after.
TRAIN_MAX_YEAR = 2018
TEST_YEAR = 2019

# Repeated-runs protocol: minimum number of seeds per experiment cell.
MIN_SEEDS = 10

# Minimum number of examples a sector/split must have to run an experiment.
MIN_EXAMPLES = 20
