#include "nsotree/net.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "nsotree/math.hpp"

namespace nsotree {

std::string to_string(Activation a) {
    return a == Activation::ReLU ? "relu" : "softplus";
}

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::ReLU;
    if (s == "softplus") return Activation::Softplus;
    throw std::invalid_argument("unknown activation: " + s);
}

std::size_t NSOTreeParams::layer_weight_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.w.size();
    return n;
}

void NSOTreeParams::validate() const {
    if (d < 1) throw std::invalid_argument("NSOTreeParams: d must be >= 1");
    if (depth < 0) throw std::invalid_argument("NSOTreeParams: depth must be >= 0");
    if (d_h < 1) throw std::invalid_argument("NSOTreeParams: d_h must be >= 1");
    if (layers.size() != static_cast<std::size_t>(depth))
        throw std::invalid_argument("NSOTreeParams: layer count does not match depth");
    for (int l = 0; l < depth; ++l) {
        const auto& layer = layers[static_cast<std::size_t>(l)];
        const std::size_t in = static_cast<std::size_t>(layer_input_dim(l));
        if (layer.w.size() != in * static_cast<std::size_t>(d_h))
            throw std::invalid_argument("NSOTreeParams: layer " + std::to_string(l + 1) +
                                        " weight size violates d + (l-1)*d_h");
        if (layer.b.size() != static_cast<std::size_t>(d_h))
            throw std::invalid_argument("NSOTreeParams: layer bias size mismatch");
        for (double v : layer.w)
            if (!std::isfinite(v)) throw std::invalid_argument("NSOTreeParams: non-finite weight");
        for (double v : layer.b)
            if (!std::isfinite(v)) throw std::invalid_argument("NSOTreeParams: non-finite bias");
    }
    if (head_w.size() != static_cast<std::size_t>(head_input_dim()))
        throw std::invalid_argument("NSOTreeParams: head size mismatch");
    for (double v : head_w)
        if (!std::isfinite(v)) throw std::invalid_argument("NSOTreeParams: non-finite head weight");
    if (!std::isfinite(head_b)) throw std::invalid_argument("NSOTreeParams: non-finite head bias");
}

NSOTreeParams init_params(int d, int depth, int d_h, std::uint64_t seed) {
    if (d < 1 || depth < 0 || d_h < 1)
        throw std::invalid_argument("init_params: invalid dimensions");
    std::mt19937_64 rng(seed);
    NSOTreeParams p;
    p.d = d;
    p.depth = depth;
    p.d_h = d_h;
    p.layers.resize(static_cast<std::size_t>(depth));
    for (int l = 0; l < depth; ++l) {
        auto& layer = p.layers[static_cast<std::size_t>(l)];
        const int in = p.layer_input_dim(l);
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        layer.w.resize(static_cast<std::size_t>(in) * static_cast<std::size_t>(d_h));
        for (auto& w : layer.w) w = uniform_in(rng, -bound, bound);
        layer.b.assign(static_cast<std::size_t>(d_h), 0.0);
    }
    const int hin = p.head_input_dim();
    const double hbound = 1.0 / std::sqrt(static_cast<double>(hin));
    p.head_w.resize(static_cast<std::size_t>(hin));
    for (auto& w : p.head_w) w = uniform_in(rng, -hbound, hbound);
    p.head_b = 0.0;
    return p;
}

namespace {

inline double dot_split(const double* w, const double* x, int d, const double* a, int na) {
    double s = 0.0;
    for (int i = 0; i < d; ++i) s += w[i] * x[i];
    for (int i = 0; i < na; ++i) s += w[d + i] * a[i];
    return s;
}

}  // namespace

ActivationTrace forward(const NSOTreeParams& p, const double* x, Activation mode) {
    ActivationTrace t;
    t.depth = p.depth;
    t.d_h = p.d_h;
    const std::size_t units = static_cast<std::size_t>(p.depth) * static_cast<std::size_t>(p.d_h);
    t.z.resize(units);
    t.a.resize(units);
    t.pattern.resize(units);
    for (int l = 0; l < p.depth; ++l) {
        const auto& layer = p.layers[static_cast<std::size_t>(l)];
        const int in = p.layer_input_dim(l);
        for (int j = 0; j < p.d_h; ++j) {
            const double* wrow = layer.w.data() + static_cast<std::size_t>(j) * static_cast<std::size_t>(in);
            const std::size_t k = static_cast<std::size_t>(l) * static_cast<std::size_t>(p.d_h) +
                                  static_cast<std::size_t>(j);
            const double z = dot_split(wrow, x, p.d, t.a.data(), l * p.d_h) + layer.b[static_cast<std::size_t>(j)];
            t.z[k] = z;
            t.pattern[k] = z >= 0.0 ? 1 : 0;
            t.a[k] = mode == Activation::ReLU ? relu(z) : softplus(z);
        }
    }
    t.score = dot_split(p.head_w.data(), x, p.d, t.a.data(), p.depth * p.d_h) + p.head_b;
    return t;
}

double forward_score(const NSOTreeParams& p, const double* x, Activation mode) {
    // Same arithmetic as forward(), minus the trace bookkeeping.
    std::vector<double> a(static_cast<std::size_t>(p.depth) * static_cast<std::size_t>(p.d_h));
    for (int l = 0; l < p.depth; ++l) {
        const auto& layer = p.layers[static_cast<std::size_t>(l)];
        const int in = p.layer_input_dim(l);
        for (int j = 0; j < p.d_h; ++j) {
            const double* wrow = layer.w.data() + static_cast<std::size_t>(j) * static_cast<std::size_t>(in);
            const double z = dot_split(wrow, x, p.d, a.data(), l * p.d_h) + layer.b[static_cast<std::size_t>(j)];
            a[static_cast<std::size_t>(l * p.d_h + j)] = mode == Activation::ReLU ? relu(z) : softplus(z);
        }
    }
    return dot_split(p.head_w.data(), x, p.d, a.data(), p.depth * p.d_h) + p.head_b;
}

std::vector<double> score_dataset(const NSOTreeParams& p, const SurvivalDataset& ds,
                                  Activation mode) {
    if (ds.d != p.d) throw std::invalid_argument("score_dataset: dimension mismatch");
    std::vector<double> s(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) s[i] = forward_score(p, ds.row(i), mode);
    return s;
}

ParamGrads ParamGrads::zeros_like(const NSOTreeParams& p) {
    ParamGrads g;
    g.layer_w.resize(p.layers.size());
    g.layer_b.resize(p.layers.size());
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        g.layer_w[l].assign(p.layers[l].w.size(), 0.0);
        g.layer_b[l].assign(p.layers[l].b.size(), 0.0);
    }
    g.head_w.assign(p.head_w.size(), 0.0);
    g.head_b = 0.0;
    return g;
}

void backward(const NSOTreeParams& p, const std::vector<const double*>& xs,
              const std::vector<ActivationTrace>& traces,
              const std::vector<double>& dscore, Activation mode, ParamGrads& grads) {
    if (xs.size() != traces.size() || xs.size() != dscore.size())
        throw std::invalid_argument("backward: batch size mismatch");
    const int units = p.depth * p.d_h;
    std::vector<double> da(static_cast<std::size_t>(units));
    for (std::size_t n = 0; n < xs.size(); ++n) {
        const double g = dscore[n];
        if (!std::isfinite(g)) throw std::invalid_argument("backward: non-finite upstream gradient");
        const double* x = xs[n];
        const ActivationTrace& t = traces[n];
        if (t.depth != p.depth || t.d_h != p.d_h)
            throw std::invalid_argument("backward: trace shape mismatch");

        grads.head_b += g;
        for (int i = 0; i < p.d; ++i) grads.head_w[static_cast<std::size_t>(i)] += g * x[i];
        for (int k = 0; k < units; ++k) {
            grads.head_w[static_cast<std::size_t>(p.d + k)] += g * t.a[static_cast<std::size_t>(k)];
            da[static_cast<std::size_t>(k)] = g * p.head_w[static_cast<std::size_t>(p.d + k)];
        }

        for (int l = p.depth - 1; l >= 0; --l) {
            const auto& layer = p.layers[static_cast<std::size_t>(l)];
            auto& gw = grads.layer_w[static_cast<std::size_t>(l)];
            auto& gb = grads.layer_b[static_cast<std::size_t>(l)];
            const int in = p.layer_input_dim(l);
            for (int j = 0; j < p.d_h; ++j) {
                const std::size_t k = static_cast<std::size_t>(l * p.d_h + j);
                const double zk = t.z[k];
                const double dact = mode == Activation::ReLU ? (zk >= 0.0 ? 1.0 : 0.0) : sigmoid(zk);
                const double dz = da[k] * dact;
                if (dz == 0.0) continue;
                gb[static_cast<std::size_t>(j)] += dz;
                const double* wrow = layer.w.data() + static_cast<std::size_t>(j) * static_cast<std::size_t>(in);
                double* gwrow = gw.data() + static_cast<std::size_t>(j) * static_cast<std::size_t>(in);
                for (int i = 0; i < p.d; ++i) gwrow[i] += dz * x[i];
                for (int m = 0; m < l * p.d_h; ++m) {
                    gwrow[p.d + m] += dz * t.a[static_cast<std::size_t>(m)];
                    da[static_cast<std::size_t>(m)] += dz * wrow[p.d + m];
                }
            }
        }
    }
}

ParamGrads backward(const NSOTreeParams& p, const std::vector<const double*>& xs,
                    const std::vector<double>& dscore, Activation mode) {
    std::vector<ActivationTrace> traces(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) traces[i] = forward(p, xs[i], mode);
    ParamGrads g = ParamGrads::zeros_like(p);
    backward(p, xs, traces, dscore, mode, g);
    return g;
}

NSOTreeParams prox_step(const NSOTreeParams& p, double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("prox_step: lambda must be >= 0");
    NSOTreeParams out = p;
    if (lambda == 0.0) return out;
    for (auto& layer : out.layers)
        for (auto& w : layer.w) w = soft_threshold(w, lambda);
    return out;
}

double sparsity(const NSOTreeParams& p) {
    const std::size_t total = p.layer_weight_count();
    if (total == 0) return 0.0;
    std::size_t zeros = 0;
    for (const auto& layer : p.layers)
        for (double w : layer.w)
            if (w == 0.0) ++zeros;
    return static_cast<double>(zeros) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// Checkpoint format

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_vector(std::ostringstream& os, const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) os << ' ';
        os << fmt17(v[i]);
    }
}

std::vector<double> parse_doubles(const std::string& s, std::size_t expected, const std::string& what) {
    std::vector<double> out;
    out.reserve(expected);
    std::istringstream is(s);
    std::string tok;
    while (is >> tok) {
        std::size_t pos = 0;
        out.push_back(std::stod(tok, &pos));
        if (pos != tok.size()) throw std::runtime_error("checkpoint: bad number in " + what);
    }
    if (out.size() != expected)
        throw std::runtime_error("checkpoint: expected " + std::to_string(expected) +
                                 " values for " + what + ", got " + std::to_string(out.size()));
    return out;
}

// "key = value" split; returns false if the line has no '='.
bool split_kv(const std::string& line, std::string& key, std::string& value) {
    const auto pos = line.find(" = ");
    if (pos == std::string::npos) return false;
    key = line.substr(0, pos);
    value = line.substr(pos + 3);
    return true;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& c) {
    c.params.validate();
    std::ostringstream os;
    os << "nsotree-checkpoint v1\n";
    os << "model = " << c.model_kind << '\n';
    os << "activation = " << to_string(c.activation) << '\n';
    os << "d = " << c.params.d << '\n';
    os << "depth = " << c.params.depth << '\n';
    os << "d_h = " << c.params.d_h << '\n';
    os << "train_data = " << (c.train_data_path.empty() ? "-" : c.train_data_path) << '\n';
    for (std::size_t i = 0; i < c.feature_names.size(); ++i)
        os << "feature " << i << " = " << c.feature_names[i] << '\n';
    if (c.standardization) {
        os << "standardize_mean = ";
        write_vector(os, c.standardization->mean);
        os << '\n';
        os << "standardize_std = ";
        write_vector(os, c.standardization->stddev);
        os << '\n';
    }
    for (int l = 0; l < c.params.depth; ++l) {
        const auto& layer = c.params.layers[static_cast<std::size_t>(l)];
        os << "layer " << (l + 1) << " w = ";
        write_vector(os, layer.w);
        os << '\n';
        os << "layer " << (l + 1) << " b = ";
        write_vector(os, layer.b);
        os << '\n';
    }
    os << "head w = ";
    write_vector(os, c.params.head_w);
    os << '\n';
    os << "head b = " << fmt17(c.params.head_b) << '\n';
    os << "end\n";
    return os.str();
}

Checkpoint parse_checkpoint(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line) || line != "nsotree-checkpoint v1")
        throw std::runtime_error("checkpoint: missing or unsupported header");

    Checkpoint c;
    int d = -1, depth = -1, d_h = -1;
    bool saw_end = false;
    std::vector<std::pair<std::size_t, std::string>> features;
    while (std::getline(is, line)) {
        if (line == "end") { saw_end = true; break; }
        std::string key, value;
        if (!split_kv(line, key, value))
            throw std::runtime_error("checkpoint: malformed line: " + line);
        if (key == "model") c.model_kind = value;
        else if (key == "activation") c.activation = activation_from_string(value);
        else if (key == "d") d = std::stoi(value);
        else if (key == "depth") depth = std::stoi(value);
        else if (key == "d_h") d_h = std::stoi(value);
        else if (key == "train_data") c.train_data_path = value == "-" ? "" : value;
        else if (key.rfind("feature ", 0) == 0) {
            features.emplace_back(std::stoul(key.substr(8)), value);
        } else if (key == "standardize_mean" || key == "standardize_std") {
            if (d < 0) throw std::runtime_error("checkpoint: standardization before dims");
            if (!c.standardization) c.standardization = Standardization{};
            auto vals = parse_doubles(value, static_cast<std::size_t>(d), key);
            if (key == "standardize_mean") c.standardization->mean = std::move(vals);
            else c.standardization->stddev = std::move(vals);
        } else if (key.rfind("layer ", 0) == 0) {
            if (d < 0 || depth < 0 || d_h < 0)
                throw std::runtime_error("checkpoint: layer data before dims");
            if (c.params.layers.empty()) {
                c.params.d = d;
                c.params.depth = depth;
                c.params.d_h = d_h;
                c.params.layers.resize(static_cast<std::size_t>(depth));
            }
            std::istringstream ks(key.substr(6));
            int l = 0;
            std::string which;
            ks >> l >> which;
            if (l < 1 || l > depth) throw std::runtime_error("checkpoint: layer index out of range");
            auto& layer = c.params.layers[static_cast<std::size_t>(l - 1)];
            const std::size_t in = static_cast<std::size_t>(d + (l - 1) * d_h);
            if (which == "w") layer.w = parse_doubles(value, in * static_cast<std::size_t>(d_h), key);
            else if (which == "b") layer.b = parse_doubles(value, static_cast<std::size_t>(d_h), key);
            else throw std::runtime_error("checkpoint: unknown layer field: " + which);
        } else if (key == "head w") {
            if (d < 0 || depth < 0 || d_h < 0) throw std::runtime_error("checkpoint: head before dims");
            if (c.params.layers.empty() && depth > 0)
                throw std::runtime_error("checkpoint: head before layers");
            c.params.d = d;
            c.params.depth = depth;
            c.params.d_h = d_h;
            c.params.layers.resize(static_cast<std::size_t>(depth));
            c.params.head_w = parse_doubles(value, static_cast<std::size_t>(d + depth * d_h), key);
        } else if (key == "head b") {
            c.params.head_b = std::stod(value);
        } else {
            throw std::runtime_error("checkpoint: unknown key: " + key);
        }
    }
    if (!saw_end) throw std::runtime_error("checkpoint: truncated file (no end marker)");
    c.feature_names.resize(features.size());
    for (auto& [i, name] : features) {
        if (i >= c.feature_names.size()) throw std::runtime_error("checkpoint: feature index gap");
        c.feature_names[i] = name;
    }
    c.params.validate();
    if (c.standardization &&
        (c.standardization->mean.size() != static_cast<std::size_t>(c.params.d) ||
         c.standardization->stddev.size() != static_cast<std::size_t>(c.params.d)))
        throw std::runtime_error("checkpoint: incomplete standardization block");
    return c;
}

void save_checkpoint(const Checkpoint& c, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << serialize_checkpoint(c);
    if (!f) throw std::runtime_error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_checkpoint(ss.str());
}

}  // namespace nsotree
