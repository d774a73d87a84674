#include "nsotree/tree.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace nsotree {

ObliqueTree extract_tree(const NSOTreeParams& params) {
    params.validate();
    ObliqueTree tree;
    tree.d = params.d;
    tree.depth = params.depth;
    tree.d_h = params.d_h;
    for (int l = 0; l < params.depth; ++l) {
        const auto& layer = params.layers[static_cast<std::size_t>(l)];
        const int in = params.layer_input_dim(l);
        for (int j = 0; j < params.d_h; ++j) {
            ObliqueSplit split;
            split.layer = l;
            split.unit = j;
            split.weights.assign(layer.w.begin() + static_cast<std::ptrdiff_t>(j) * in,
                                 layer.w.begin() + static_cast<std::ptrdiff_t>(j + 1) * in);
            split.threshold = -layer.b[static_cast<std::size_t>(j)];
            tree.splits.push_back(std::move(split));
        }
    }
    tree.leaf_weights = params.head_w;
    tree.leaf_bias = params.head_b;
    return tree;
}

RouteResult route(const ObliqueTree& tree, const double* x) {
    // Accumulation order matches forward(): covariate terms, ancestor
    // activation terms, then the bias. Leaf values are therefore bit-equal
    // to the ReLU-mode network score.
    RouteResult r;
    const int units = tree.levels();
    r.pattern.resize(static_cast<std::size_t>(units));
    std::vector<double> a(static_cast<std::size_t>(units));
    for (int k = 0; k < units; ++k) {
        const auto& s = tree.splits[static_cast<std::size_t>(k)];
        double acc = 0.0;
        for (int i = 0; i < tree.d; ++i) acc += s.weights[static_cast<std::size_t>(i)] * x[i];
        const int na = s.layer * tree.d_h;
        for (int m = 0; m < na; ++m)
            acc += s.weights[static_cast<std::size_t>(tree.d + m)] * a[static_cast<std::size_t>(m)];
        const double z = acc + (-s.threshold);  // -threshold == unit bias
        r.pattern[static_cast<std::size_t>(k)] = z >= 0.0 ? 1 : 0;
        a[static_cast<std::size_t>(k)] = z >= 0.0 ? z : 0.0;
    }
    double acc = 0.0;
    for (int i = 0; i < tree.d; ++i) acc += tree.leaf_weights[static_cast<std::size_t>(i)] * x[i];
    for (int m = 0; m < units; ++m)
        acc += tree.leaf_weights[static_cast<std::size_t>(tree.d + m)] * a[static_cast<std::size_t>(m)];
    r.leaf_value = acc + tree.leaf_bias;
    return r;
}

ObliqueTree annotate_splits(const ObliqueTree& tree, const SurvivalDataset& dataset) {
    dataset.validate();
    if (dataset.d != tree.d)
        throw std::invalid_argument("annotate_splits: dataset dimension mismatch");
    if (dataset.size() == 0) throw std::invalid_argument("annotate_splits: empty dataset");

    // Pattern per record, from full-network routing.
    std::vector<std::vector<std::uint8_t>> patterns(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i)
        patterns[i] = route(tree, dataset.row(i)).pattern;

    ObliqueTree out = tree;
    for (int k = 0; k < tree.levels(); ++k) {
        std::vector<double> times_on, times_off;
        std::vector<std::uint8_t> events_on, events_off;
        for (std::size_t i = 0; i < dataset.size(); ++i) {
            if (patterns[i][static_cast<std::size_t>(k)]) {
                times_on.push_back(dataset.time[i]);
                events_on.push_back(dataset.event[i]);
            } else {
                times_off.push_back(dataset.time[i]);
                events_off.push_back(dataset.event[i]);
            }
        }
        SplitAnnotation ann;
        ann.n_on = static_cast<int>(times_on.size());
        ann.n_off = static_cast<int>(times_off.size());
        if (times_on.empty() || times_off.empty()) {
            ann.degenerate = true;
        } else {
            try {
                const LogRankResult lr = log_rank_test(times_on, events_on, times_off, events_off);
                ann.statistic = lr.statistic;
                ann.p_value = lr.p_value;
            } catch (const std::invalid_argument&) {
                ann.degenerate = true;  // e.g. no events in the pooled branches
            }
        }
        out.splits[static_cast<std::size_t>(k)].annotation = ann;
    }
    return out;
}

TreeFormat tree_format_from_string(const std::string& s) {
    if (s == "graph" || s == "graph-description" || s == "dot") return TreeFormat::GraphDescription;
    if (s == "text" || s == "structured-text") return TreeFormat::StructuredText;
    throw std::invalid_argument("unknown tree format: " + s);
}

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt3(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::string input_feature_name(const ObliqueTree& tree, int idx) {
    if (idx < tree.d) {
        if (!tree.feature_names.empty()) return tree.feature_names[static_cast<std::size_t>(idx)];
        return "x" + std::to_string(idx);
    }
    const int k = idx - tree.d;
    return "a(" + std::to_string(k / tree.d_h + 1) + "," + std::to_string(k % tree.d_h + 1) + ")";
}

std::string split_label(const ObliqueTree& tree, const ObliqueSplit& s) {
    std::ostringstream os;
    os << "L" << (s.layer + 1) << ".u" << (s.unit + 1) << "\\n";
    bool first = true;
    for (std::size_t i = 0; i < s.weights.size(); ++i) {
        if (s.weights[i] == 0.0) continue;
        if (!first) os << " ";
        os << input_feature_name(tree, static_cast<int>(i)) << ":" << fmt3(s.weights[i]);
        first = false;
    }
    if (first) os << "(all weights zero)";
    os << " >= " << fmt3(s.threshold);
    if (s.annotation) {
        if (s.annotation->degenerate) {
            os << "\\ndegenerate (" << s.annotation->n_on << "/" << s.annotation->n_off << ")";
        } else {
            os << "\\nlogrank " << fmt3(s.annotation->statistic) << ", p " << fmt3(s.annotation->p_value)
               << " (" << s.annotation->n_on << "/" << s.annotation->n_off << ")";
        }
    }
    return os.str();
}

int clipped_levels(const ObliqueTree& tree, int max_layers) {
    if (max_layers < 0 || max_layers > tree.depth) max_layers = tree.depth;
    return max_layers * tree.d_h;
}

std::string export_graph(const ObliqueTree& tree, int max_layers, bool expand) {
    const int levels = clipped_levels(tree, max_layers);
    std::ostringstream os;
    os << "digraph nsotree {\n";
    os << "  node [shape=box];\n";
    if (!expand) {
        for (int k = 0; k < levels; ++k) {
            os << "  n" << k << " [label=\"" << split_label(tree, tree.splits[static_cast<std::size_t>(k)])
               << "\"];\n";
        }
        os << "  leaf [label=\"linear leaf model\", shape=ellipse];\n";
        for (int k = 0; k < levels; ++k) {
            const std::string next = k + 1 < levels ? "n" + std::to_string(k + 1) : "leaf";
            os << "  n" << k << " -> " << next << " [label=\"yes\"];\n";
            os << "  n" << k << " -> " << next << " [label=\"no\"];\n";
        }
    } else {
        if (levels > 12)
            throw std::invalid_argument("export_tree: full expansion limited to 12 levels");
        // Binary tree: every node at level k carries the same hyperplane.
        for (int k = 0; k < levels; ++k) {
            const long count = 1L << k;
            for (long c = 0; c < count; ++c) {
                os << "  n" << k << "_" << c << " [label=\""
                   << split_label(tree, tree.splits[static_cast<std::size_t>(k)]) << "\"];\n";
            }
        }
        const long leaf_count = 1L << levels;
        for (long c = 0; c < leaf_count; ++c)
            os << "  leaf_" << c << " [label=\"leaf\", shape=ellipse];\n";
        for (int k = 0; k < levels; ++k) {
            const long count = 1L << k;
            for (long c = 0; c < count; ++c) {
                const bool last = k + 1 == levels;
                const std::string on = last ? "leaf_" + std::to_string(2 * c + 1)
                                            : "n" + std::to_string(k + 1) + "_" + std::to_string(2 * c + 1);
                const std::string off = last ? "leaf_" + std::to_string(2 * c)
                                             : "n" + std::to_string(k + 1) + "_" + std::to_string(2 * c);
                os << "  n" << k << "_" << c << " -> " << on << " [label=\"yes\"];\n";
                os << "  n" << k << "_" << c << " -> " << off << " [label=\"no\"];\n";
            }
        }
    }
    os << "}\n";
    return os.str();
}

// The text schema always carries the whole tree: the leaf model consumes
// every activation, so a layer-clipped file would not round-trip.
std::string export_text(const ObliqueTree& tree) {
    const int levels = tree.levels();
    std::ostringstream os;
    os << "nsotree-tree v1\n";
    os << "d = " << tree.d << "\n";
    os << "depth = " << tree.depth << "\n";
    os << "d_h = " << tree.d_h << "\n";
    for (std::size_t i = 0; i < tree.feature_names.size(); ++i)
        os << "feature " << i << " = " << tree.feature_names[i] << "\n";
    for (int k = 0; k < levels; ++k) {
        const auto& s = tree.splits[static_cast<std::size_t>(k)];
        os << "split " << (s.layer + 1) << " " << (s.unit + 1) << " w =";
        for (double w : s.weights) os << " " << fmt17(w);
        os << "\n";
        os << "split " << (s.layer + 1) << " " << (s.unit + 1) << " t = " << fmt17(s.threshold) << "\n";
        if (s.annotation) {
            const auto& a = *s.annotation;
            os << "split " << (s.layer + 1) << " " << (s.unit + 1) << " annot = " << fmt17(a.statistic)
               << " " << fmt17(a.p_value) << " " << a.n_on << " " << a.n_off << " "
               << (a.degenerate ? 1 : 0) << "\n";
        }
    }
    os << "leaf w =";
    for (double w : tree.leaf_weights) os << " " << fmt17(w);
    os << "\n";
    os << "leaf b = " << fmt17(tree.leaf_bias) << "\n";
    os << "end\n";
    return os.str();
}

}  // namespace

std::string export_tree(const ObliqueTree& tree, TreeFormat format, int max_layers, bool expand) {
    if (tree.splits.size() != static_cast<std::size_t>(tree.levels()))
        throw std::invalid_argument("export_tree: split count does not match depth * d_h");
    switch (format) {
        case TreeFormat::GraphDescription: return export_graph(tree, max_layers, expand);
        case TreeFormat::StructuredText: return export_text(tree);
    }
    throw std::invalid_argument("export_tree: unknown format");
}

ObliqueTree parse_tree(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line) || line != "nsotree-tree v1")
        throw std::runtime_error("tree: missing or unsupported header");

    ObliqueTree tree;
    bool dims_done = false;
    bool saw_end = false;
    bool saw_leaf = false;
    auto ensure_dims = [&]() {
        if (dims_done) return;
        if (tree.d < 1 || tree.depth < 0 || tree.d_h < 1)
            throw std::runtime_error("tree: splits before dims");
        tree.splits.resize(static_cast<std::size_t>(tree.depth) * static_cast<std::size_t>(tree.d_h));
        for (int l = 0; l < tree.depth; ++l)
            for (int j = 0; j < tree.d_h; ++j) {
                auto& s = tree.splits[static_cast<std::size_t>(l * tree.d_h + j)];
                s.layer = l;
                s.unit = j;
            }
        dims_done = true;
    };
    auto parse_values = [](const std::string& s) {
        std::vector<double> out;
        std::istringstream vs(s);
        double v;
        while (vs >> v) out.push_back(v);
        return out;
    };

    while (std::getline(is, line)) {
        if (line == "end") { saw_end = true; break; }
        const auto eq = line.find(" = ");
        if (eq == std::string::npos) throw std::runtime_error("tree: malformed line: " + line);
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 3);
        if (key == "d") tree.d = std::stoi(value);
        else if (key == "depth") tree.depth = std::stoi(value);
        else if (key == "d_h") tree.d_h = std::stoi(value);
        else if (key.rfind("feature ", 0) == 0) {
            const std::size_t idx = std::stoul(key.substr(8));
            if (tree.feature_names.size() <= idx) tree.feature_names.resize(idx + 1);
            tree.feature_names[idx] = value;
        } else if (key.rfind("split ", 0) == 0) {
            ensure_dims();
            std::istringstream ks(key.substr(6));
            int l = 0, j = 0;
            std::string field;
            ks >> l >> j >> field;
            if (l < 1 || l > tree.depth || j < 1 || j > tree.d_h)
                throw std::runtime_error("tree: split index out of range: " + key);
            auto& s = tree.splits[static_cast<std::size_t>((l - 1) * tree.d_h + (j - 1))];
            if (field == "w") {
                s.weights = parse_values(value);
                if (s.weights.size() != static_cast<std::size_t>(tree.d + (l - 1) * tree.d_h))
                    throw std::runtime_error("tree: split weight length mismatch at " + key);
            } else if (field == "t") {
                s.threshold = std::stod(value);
            } else if (field == "annot") {
                const auto vals = parse_values(value);
                if (vals.size() != 5) throw std::runtime_error("tree: bad annotation at " + key);
                SplitAnnotation a;
                a.statistic = vals[0];
                a.p_value = vals[1];
                a.n_on = static_cast<int>(vals[2]);
                a.n_off = static_cast<int>(vals[3]);
                a.degenerate = vals[4] != 0.0;
                s.annotation = a;
            } else {
                throw std::runtime_error("tree: unknown split field: " + field);
            }
        } else if (key == "leaf w") {
            ensure_dims();
            tree.leaf_weights = parse_values(value);
            if (tree.leaf_weights.size() !=
                static_cast<std::size_t>(tree.d + tree.depth * tree.d_h))
                throw std::runtime_error("tree: leaf weight length mismatch");
            saw_leaf = true;
        } else if (key == "leaf b") {
            tree.leaf_bias = std::stod(value);
        } else {
            throw std::runtime_error("tree: unknown key: " + key);
        }
    }
    if (!saw_end) throw std::runtime_error("tree: truncated file (no end marker)");
    ensure_dims();
    if (!saw_leaf) throw std::runtime_error("tree: missing leaf model");
    for (const auto& s : tree.splits)
        if (s.weights.size() != static_cast<std::size_t>(tree.d + s.layer * tree.d_h))
            throw std::runtime_error("tree: incomplete split data");
    return tree;
}

}  // namespace nsotree
