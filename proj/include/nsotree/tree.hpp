#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nsotree/net.hpp"
#include "nsotree/survival.hpp"

namespace nsotree {

struct SplitAnnotation {
    double statistic = 0.0;
    double p_value = 1.0;
    int n_on = 0;   // records satisfying the split test
    int n_off = 0;
    bool degenerate = false;  // one branch empty; statistic/p meaningless
};

/// One oblique split: test is weights . input >= threshold over
/// concat[x, ancestor activations]. The weights are the network unit's row
/// verbatim; threshold is the negated unit bias, so the test agrees with
/// the unit's pattern 1[z >= 0].
struct ObliqueSplit {
    int layer = 0;  // 0-based source layer
    int unit = 0;
    std::vector<double> weights;  // length d + layer*d_h
    double threshold = 0.0;
    std::optional<SplitAnnotation> annotation;
};

/// Layered chain of splits, one level per (layer, unit), with the linear
/// output head as the leaf model. With the cumulative concatenation every
/// path shares the downstream hyperplanes, so the chain is the finite
/// faithful form; a fully expanded binary rendering is available for small
/// trees in export_tree.
struct ObliqueTree {
    int d = 0;
    int depth = 0;
    int d_h = 1;
    std::vector<ObliqueSplit> splits;  // depth * d_h, layer-major
    std::vector<double> leaf_weights;  // copy of the output head
    double leaf_bias = 0.0;
    std::vector<std::string> feature_names;  // optional, raw covariates only

    int levels() const { return depth * d_h; }
};

/// Copies every unit's hyperplane and the output head out of the trained
/// parameters.
ObliqueTree extract_tree(const NSOTreeParams& params);

struct RouteResult {
    std::vector<std::uint8_t> pattern;  // depth*d_h, 1 = "on" branch
    double leaf_value = 0.0;
};

/// Routes one input through the tree with ReLU semantics. The pattern and
/// leaf value match forward(params, x, ReLU) exactly: the arithmetic is
/// the same.
RouteResult route(const ObliqueTree& tree, const double* x);

/// For every split, partitions the dataset by the split test evaluated on
/// full-network activations and attaches the two-sample log-rank result
/// plus branch sizes. Splits with an empty branch are flagged degenerate.
ObliqueTree annotate_splits(const ObliqueTree& tree, const SurvivalDataset& dataset);

enum class TreeFormat { GraphDescription, StructuredText };

TreeFormat tree_format_from_string(const std::string& s);

/// GraphDescription emits a Graphviz node/edge list with per-split weight
/// bars (feature name -> weight) in the labels. StructuredText is the
/// versioned schema read back by parse_tree. max_layers < 0 keeps every
/// layer; expand renders the full binary tree (levels <= 12 only).
std::string export_tree(const ObliqueTree& tree, TreeFormat format, int max_layers = -1,
                        bool expand = false);

ObliqueTree parse_tree(const std::string& text);

}  // namespace nsotree
