#include "hbp/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "hbp/parallel.hpp"
#include "hbp/rng.hpp"

namespace hbp {

const Tensor& Gradients::at(const std::string& name) const {
    auto it = by_name.find(name);
    if (it == by_name.end()) {
        throw Error("no gradient recorded for parameter '" + name + "'");
    }
    return it->second;
}

void accumulate(Gradients& into, const Gradients& delta) {
    for (const auto& [name, g] : delta.by_name) {
        auto it = into.by_name.find(name);
        if (it == into.by_name.end()) {
            into.by_name.emplace(name, g);
        } else {
            it->second = add(it->second, g);
        }
    }
}

void scale_in_place(Gradients& g, double factor) {
    for (auto& [name, t] : g.by_name) t = scale(t, factor);
}

// --- tape -------------------------------------------------------------------

void Tape::check_id(ValueId id) const {
    if (id >= nodes_.size()) {
        throw Error("tape: value id " + std::to_string(id) + " out of range");
    }
}

const Tape::Node& Tape::node(ValueId id) const {
    check_id(id);
    return nodes_[id];
}

ValueId Tape::push(Node n) {
    if (check_finite_ && !n.value.all_finite()) {
        static const char* names[] = {
            "leaf",        "matmul",      "hadamard",    "add",
            "sub",         "scale",       "relu",        "maxpool2",
            "conv2d",      "sum_spatial", "reshape",     "concat",
            "signed_sqrt", "l2_normalize","sum_all",     "softmax_cross_entropy",
        };
        throw NumericError(std::string("non-finite value produced by op '") +
                           names[static_cast<int>(n.op)] + "'");
    }
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
}

ValueId Tape::param(const std::string& name, Tensor value) {
    if (name.empty()) throw Error("tape: parameter name must be non-empty");
    if (leaf_names_.count(name)) {
        throw Error("tape: duplicate parameter name '" + name + "'");
    }
    Node n;
    n.op = Op::leaf;
    n.value = std::move(value);
    n.name = name;
    n.differentiable = true;
    ValueId id = push(std::move(n));
    leaf_names_.emplace(name, id);
    return id;
}

ValueId Tape::constant(Tensor value) {
    Node n;
    n.op = Op::leaf;
    n.value = std::move(value);
    return push(std::move(n));
}

ValueId Tape::matmul(ValueId a, ValueId b) {
    Node n;
    n.op = Op::matmul;
    n.inputs = {a, b};
    n.value = hbp::matmul(node(a).value, node(b).value);
    return push(std::move(n));
}

ValueId Tape::hadamard(ValueId a, ValueId b) {
    Node n;
    n.op = Op::hadamard;
    n.inputs = {a, b};
    n.value = hbp::hadamard(node(a).value, node(b).value);
    return push(std::move(n));
}

ValueId Tape::add(ValueId a, ValueId b) {
    Node n;
    n.op = Op::add;
    n.inputs = {a, b};
    n.value = hbp::add(node(a).value, node(b).value);
    return push(std::move(n));
}

ValueId Tape::sub(ValueId a, ValueId b) {
    Node n;
    n.op = Op::sub;
    n.inputs = {a, b};
    n.value = hbp::sub(node(a).value, node(b).value);
    return push(std::move(n));
}

ValueId Tape::scale(ValueId a, double factor) {
    Node n;
    n.op = Op::scale;
    n.inputs = {a};
    n.factor = factor;
    n.value = hbp::scale(node(a).value, factor);
    return push(std::move(n));
}

ValueId Tape::relu(ValueId x) {
    Node n;
    n.op = Op::relu;
    n.inputs = {x};
    n.value = hbp::relu(node(x).value);
    return push(std::move(n));
}

ValueId Tape::maxpool2(ValueId x) {
    Node n;
    n.op = Op::maxpool2;
    n.inputs = {x};
    n.value = hbp::maxpool2(node(x).value, &n.argmax);
    return push(std::move(n));
}

ValueId Tape::conv2d(ValueId input, ValueId kernels, int stride, int pad) {
    const Tensor& in = node(input).value;
    const Tensor& k = node(kernels).value;
    Node n;
    n.op = Op::conv2d;
    n.inputs = {input, kernels};
    n.stride = stride;
    n.pad = pad;
    n.value = hbp::conv2d(in, k, stride, pad);
    // Keep the patch matrix; both backward products reuse it.
    n.saved = im2col(in, k.extent(0), k.extent(1), stride, pad, n.value.extent(0),
                     n.value.extent(1));
    return push(std::move(n));
}

ValueId Tape::sum_spatial(ValueId x) {
    const Tensor& v = node(x).value;
    Node n;
    n.op = Op::sum_spatial;
    n.inputs = {x};
    if (v.rank() == 3) {
        n.value = hbp::sum_over_spatial(v);
    } else if (v.rank() == 2) {
        n.value = hbp::sum_rows(v);
    } else {
        throw ShapeError("sum_spatial: expected rank-2 or rank-3 input, got " + v.shape_str());
    }
    return push(std::move(n));
}

ValueId Tape::reshape(ValueId x, std::vector<int> shape) {
    Node n;
    n.op = Op::reshape;
    n.inputs = {x};
    n.value = node(x).value.reshaped(std::move(shape));
    return push(std::move(n));
}

ValueId Tape::concat(std::span<const ValueId> parts) {
    if (parts.empty()) throw ShapeError("concat: needs at least one input");
    std::int64_t total = 0;
    for (ValueId p : parts) {
        const Tensor& t = node(p).value;
        if (t.rank() != 1) {
            throw ShapeError("concat: expected rank-1 inputs, got " + t.shape_str());
        }
        total += t.size();
    }
    Tensor out({static_cast<int>(total)});
    std::int64_t offset = 0;
    for (ValueId p : parts) {
        const Tensor& t = node(p).value;
        std::memcpy(out.data() + offset, t.data(), sizeof(double) * static_cast<std::size_t>(t.size()));
        offset += t.size();
    }
    Node n;
    n.op = Op::concat;
    n.inputs.assign(parts.begin(), parts.end());
    n.value = std::move(out);
    return push(std::move(n));
}

ValueId Tape::signed_sqrt(ValueId v) {
    const Tensor& x = node(v).value;
    Tensor y(x.shape());
    for (std::int64_t i = 0; i < x.size(); ++i) {
        y[i] = x[i] >= 0.0 ? std::sqrt(x[i]) : -std::sqrt(-x[i]);
    }
    Node n;
    n.op = Op::signed_sqrt;
    n.inputs = {v};
    n.value = std::move(y);
    return push(std::move(n));
}

ValueId Tape::l2_normalize(ValueId v) {
    const Tensor& x = node(v).value;
    double norm_sq = 0.0;
    for (std::int64_t i = 0; i < x.size(); ++i) norm_sq += x[i] * x[i];
    const double norm = std::sqrt(norm_sq);
    Tensor y(x.shape());
    if (norm > 0.0) {
        for (std::int64_t i = 0; i < x.size(); ++i) y[i] = x[i] / norm;
    }
    Node n;
    n.op = Op::l2_normalize;
    n.inputs = {v};
    n.value = std::move(y);
    return push(std::move(n));
}

ValueId Tape::sum_all(ValueId x) {
    Node n;
    n.op = Op::sum_all;
    n.inputs = {x};
    n.value = Tensor::scalar(hbp::sum_all(node(x).value));
    return push(std::move(n));
}

ValueId Tape::softmax_cross_entropy(ValueId scores, int label) {
    const Tensor& s = node(scores).value;
    if (s.rank() != 1) {
        throw ShapeError("softmax_cross_entropy: expected rank-1 scores, got " + s.shape_str());
    }
    if (label < 0 || label >= s.extent(0)) {
        throw Error("softmax_cross_entropy: label " + std::to_string(label) +
                    " out of range for " + std::to_string(s.extent(0)) + " classes");
    }
    double max_s = s[0];
    for (std::int64_t i = 1; i < s.size(); ++i) max_s = std::max(max_s, s[i]);
    double denom = 0.0;
    Tensor probs(s.shape());
    for (std::int64_t i = 0; i < s.size(); ++i) {
        probs[i] = std::exp(s[i] - max_s);
        denom += probs[i];
    }
    for (std::int64_t i = 0; i < s.size(); ++i) probs[i] /= denom;
    const double loss = std::log(denom) - (s[label] - max_s);
    Node n;
    n.op = Op::softmax_cross_entropy;
    n.inputs = {scores};
    n.label = label;
    n.saved = std::move(probs);
    n.value = Tensor::scalar(loss);
    return push(std::move(n));
}

const Tensor& Tape::value(ValueId id) const { return node(id).value; }

Gradients Tape::backward(ValueId output) const {
    return backward(output, Tensor::scalar(1.0));
}

Gradients Tape::backward(ValueId output, const Tensor& seed) const {
    check_id(output);
    const Tensor& out_val = nodes_[output].value;
    if (!seed.same_shape(out_val)) {
        throw ShapeError("backward: seed shape " + seed.shape_str() +
                         " does not match output shape " + out_val.shape_str());
    }

    // One adjoint slot per node, allocated on first touch.
    std::vector<Tensor> adj(nodes_.size());
    std::vector<bool> touched(nodes_.size(), false);
    auto add_into = [&](ValueId id, const Tensor& g) {
        if (!touched[id]) {
            adj[id] = g;
            touched[id] = true;
        } else {
            adj[id] = hbp::add(adj[id], g);
        }
    };

    add_into(output, seed);

    for (ValueId id = output + 1; id-- > 0;) {
        if (!touched[id]) continue;
        const Node& n = nodes_[id];
        const Tensor& g = adj[id];
        switch (n.op) {
            case Op::leaf:
                break;
            case Op::matmul: {
                const Tensor& a = nodes_[n.inputs[0]].value;
                const Tensor& b = nodes_[n.inputs[1]].value;
                const int m = a.extent(0), k = a.extent(1), nn = b.extent(1);
                Tensor ga({m, k});
                matmul_nt_into(g.data(), b.data(), ga.data(), m, nn, k);
                Tensor gb({k, nn});
                matmul_tn_acc(a.data(), g.data(), gb.data(), m, k, nn);
                add_into(n.inputs[0], ga);
                add_into(n.inputs[1], gb);
                break;
            }
            case Op::hadamard: {
                add_into(n.inputs[0], hbp::hadamard(g, nodes_[n.inputs[1]].value));
                add_into(n.inputs[1], hbp::hadamard(g, nodes_[n.inputs[0]].value));
                break;
            }
            case Op::add: {
                add_into(n.inputs[0], g);
                add_into(n.inputs[1], g);
                break;
            }
            case Op::sub: {
                add_into(n.inputs[0], g);
                add_into(n.inputs[1], hbp::scale(g, -1.0));
                break;
            }
            case Op::scale: {
                add_into(n.inputs[0], hbp::scale(g, n.factor));
                break;
            }
            case Op::relu: {
                const Tensor& x = nodes_[n.inputs[0]].value;
                Tensor gx(x.shape());
                for (std::int64_t i = 0; i < x.size(); ++i) gx[i] = x[i] > 0.0 ? g[i] : 0.0;
                add_into(n.inputs[0], gx);
                break;
            }
            case Op::maxpool2: {
                const Tensor& x = nodes_[n.inputs[0]].value;
                Tensor gx(x.shape());
                for (std::size_t i = 0; i < n.argmax.size(); ++i) {
                    gx[n.argmax[i]] += g[static_cast<std::int64_t>(i)];
                }
                add_into(n.inputs[0], gx);
                break;
            }
            case Op::conv2d: {
                const Tensor& in = nodes_[n.inputs[0]].value;
                const Tensor& ker = nodes_[n.inputs[1]].value;
                const int oh = n.value.extent(0), ow = n.value.extent(1);
                const int cout = ker.extent(3);
                const int kh = ker.extent(0), kw = ker.extent(1), cin = ker.extent(2);
                const int patch = kh * kw * cin;
                const int rows = oh * ow;
                // grad kernels: cols^T · g
                Tensor gk(ker.shape());
                matmul_tn_acc(n.saved.data(), g.data(), gk.data(), rows, patch, cout);
                // grad input: (g · K^T) scattered back through the patches
                Tensor gcols({rows, patch});
                matmul_nt_into(g.data(), ker.data(), gcols.data(), rows, cout, patch);
                Tensor gin(in.shape());
                const int h = in.extent(0), w = in.extent(1);
                for (int oi = 0; oi < oh; ++oi) {
                    for (int oj = 0; oj < ow; ++oj) {
                        const double* row = gcols.data() + (static_cast<std::size_t>(oi) * ow + oj) * patch;
                        for (int p = 0; p < kh; ++p) {
                            const int ii = oi * n.stride - n.pad + p;
                            if (ii < 0 || ii >= h) continue;
                            for (int q = 0; q < kw; ++q) {
                                const int jj = oj * n.stride - n.pad + q;
                                if (jj < 0 || jj >= w) continue;
                                double* dst = gin.data() + (static_cast<std::size_t>(ii) * w + jj) * cin;
                                const double* src = row + (static_cast<std::size_t>(p) * kw + q) * cin;
                                for (int cc = 0; cc < cin; ++cc) dst[cc] += src[cc];
                            }
                        }
                    }
                }
                add_into(n.inputs[0], gin);
                add_into(n.inputs[1], gk);
                break;
            }
            case Op::sum_spatial: {
                const Tensor& x = nodes_[n.inputs[0]].value;
                const int d = x.extent(x.rank() - 1);
                const std::int64_t locations = x.size() / d;
                Tensor gx(x.shape());
                for (std::int64_t loc = 0; loc < locations; ++loc) {
                    double* row = gx.data() + loc * d;
                    for (int kk = 0; kk < d; ++kk) row[kk] = g[kk];
                }
                add_into(n.inputs[0], gx);
                break;
            }
            case Op::reshape: {
                add_into(n.inputs[0], g.reshaped(nodes_[n.inputs[0]].value.shape()));
                break;
            }
            case Op::concat: {
                std::int64_t offset = 0;
                for (ValueId p : n.inputs) {
                    const Tensor& part = nodes_[p].value;
                    Tensor gp(part.shape());
                    std::memcpy(gp.data(), g.data() + offset,
                                sizeof(double) * static_cast<std::size_t>(part.size()));
                    offset += part.size();
                    add_into(p, gp);
                }
                break;
            }
            case Op::signed_sqrt: {
                const Tensor& x = nodes_[n.inputs[0]].value;
                Tensor gx(x.shape());
                for (std::int64_t i = 0; i < x.size(); ++i) {
                    const double a = std::abs(x[i]);
                    gx[i] = a > 0.0 ? g[i] * 0.5 / std::sqrt(a) : 0.0;
                }
                add_into(n.inputs[0], gx);
                break;
            }
            case Op::l2_normalize: {
                const Tensor& x = nodes_[n.inputs[0]].value;
                const Tensor& y = n.value;
                double norm_sq = 0.0;
                for (std::int64_t i = 0; i < x.size(); ++i) norm_sq += x[i] * x[i];
                const double norm = std::sqrt(norm_sq);
                Tensor gx(x.shape());
                if (norm > 0.0) {
                    double dot = 0.0;
                    for (std::int64_t i = 0; i < x.size(); ++i) dot += y[i] * g[i];
                    for (std::int64_t i = 0; i < x.size(); ++i) {
                        gx[i] = (g[i] - y[i] * dot) / norm;
                    }
                }
                add_into(n.inputs[0], gx);
                break;
            }
            case Op::sum_all: {
                const Tensor& x = nodes_[n.inputs[0]].value;
                add_into(n.inputs[0], Tensor::full(x.shape(), g[0]));
                break;
            }
            case Op::softmax_cross_entropy: {
                Tensor gs(n.saved.shape());
                for (std::int64_t i = 0; i < gs.size(); ++i) gs[i] = g[0] * n.saved[i];
                gs[n.label] -= g[0];
                add_into(n.inputs[0], gs);
                break;
            }
        }
    }

    Gradients grads;
    for (const auto& [name, id] : leaf_names_) {
        if (touched[id]) {
            grads.by_name.emplace(name, adj[id]);
        } else {
            grads.by_name.emplace(name, Tensor::zeros(nodes_[id].value.shape()));
        }
    }
    return grads;
}

namespace {

// FNV-1a over raw bytes.
std::uint64_t hash_bytes(std::uint64_t h, const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

// Signed-sqrt derivative magnitude explodes near zero; central differences
// at epsilon=1e-5 lose the 1e-5 tolerance once inputs come within ~5e-3.
constexpr double kSignedSqrtHazard = 5e-3;

} // namespace

FdFingerprint Tape::fd_fingerprint() const {
    FdFingerprint fp;
    std::uint64_t h = 1469598103934665603ULL;
    for (std::size_t id = 0; id < nodes_.size(); ++id) {
        const Node& n = nodes_[id];
        switch (n.op) {
            case Op::relu: {
                const Tensor& x = nodes_[n.inputs[0]].value;
                for (std::int64_t i = 0; i < x.size(); ++i) {
                    const unsigned char bit = x[i] > 0.0 ? 1 : 0;
                    h = hash_bytes(h, &bit, 1);
                }
                break;
            }
            case Op::maxpool2:
                h = hash_bytes(h, n.argmax.data(), n.argmax.size() * sizeof(std::int64_t));
                break;
            case Op::signed_sqrt: {
                const Tensor& x = nodes_[n.inputs[0]].value;
                for (std::int64_t i = 0; i < x.size(); ++i) {
                    const unsigned char s = x[i] > 0.0 ? 1 : (x[i] < 0.0 ? 2 : 0);
                    h = hash_bytes(h, &s, 1);
                    if (std::abs(x[i]) < kSignedSqrtHazard) fp.hazard = true;
                }
                break;
            }
            default:
                break;
        }
    }
    fp.signature = h;
    return fp;
}

// --- finite-difference checking ----------------------------------------------

bool GradcheckReport::pass() const {
    for (const auto& p : params) {
        if (!p.pass) return false;
    }
    return true;
}

std::string GradcheckReport::summary() const {
    std::ostringstream out;
    for (const auto& p : params) {
        out << (p.pass ? "ok  " : "FAIL") << "  " << p.name << "  max_rel_err=" << p.max_rel_err
            << "  checked=" << p.checked << "  skipped=" << p.skipped << "\n";
    }
    return out.str();
}

namespace {

struct ScalarEval {
    double value;
    FdFingerprint fingerprint;
};

ScalarEval eval_scalar(const TapeFn& f, const std::map<std::string, Tensor>& params) {
    Tape tape(/*check_finite=*/true);
    ValueId out = f(tape, params);
    if (tape.value(out).size() != 1) out = tape.sum_all(out);
    return {tape.value(out)[0], tape.fd_fingerprint()};
}

} // namespace

GradcheckReport gradcheck_against(const TapeFn& f, const std::map<std::string, Tensor>& params,
                                  const Gradients& analytic, const GradcheckSettings& settings,
                                  int threads) {
    if (settings.epsilon <= 0.0) throw Error("gradcheck: epsilon must be positive");

    struct Coord {
        const std::string* name;
        std::int64_t index;
    };
    std::vector<Coord> coords;
    for (const auto& [name, t] : params) {
        for (std::int64_t i = 0; i < t.size(); ++i) coords.push_back({&name, i});
    }

    struct CoordResult {
        double fd = 0.0;
        bool skipped = false;
    };
    std::vector<CoordResult> results(coords.size());

    parallel_for(coords.size(), threads, [&](std::size_t ci) {
        const Coord& c = coords[ci];
        std::map<std::string, Tensor> perturbed = params;
        Tensor& t = perturbed.at(*c.name);
        const double original = t[c.index];
        t[c.index] = original + settings.epsilon;
        const ScalarEval plus = eval_scalar(f, perturbed);
        t[c.index] = original - settings.epsilon;
        const ScalarEval minus = eval_scalar(f, perturbed);
        if (!plus.fingerprint.comparable_with(minus.fingerprint)) {
            results[ci].skipped = true;
            return;
        }
        results[ci].fd = (plus.value - minus.value) / (2.0 * settings.epsilon);
    });

    GradcheckReport report;
    report.tolerance = settings.tolerance;
    report.epsilon = settings.epsilon;
    std::size_t ci = 0;
    for (const auto& [name, t] : params) {
        GradcheckReport::ParamStat stat;
        stat.name = name;
        const Tensor* g_ad = analytic.contains(name) ? &analytic.at(name) : nullptr;
        if (g_ad && !g_ad->same_shape(t)) {
            throw ShapeError("gradcheck: gradient shape " + g_ad->shape_str() +
                             " does not match parameter '" + name + "' shape " + t.shape_str());
        }
        for (std::int64_t i = 0; i < t.size(); ++i, ++ci) {
            if (results[ci].skipped) {
                ++stat.skipped;
                continue;
            }
            const double ad = g_ad ? (*g_ad)[i] : 0.0;
            const double fd = results[ci].fd;
            if (!std::isfinite(ad) || !std::isfinite(fd)) {
                throw NumericError("gradcheck: non-finite gradient for parameter '" + name + "'");
            }
            const double rel = std::abs(ad - fd) / (std::abs(ad) + std::abs(fd) + 1e-12);
            stat.max_rel_err = std::max(stat.max_rel_err, rel);
            ++stat.checked;
        }
        stat.pass = stat.max_rel_err <= settings.tolerance;
        report.params.push_back(std::move(stat));
    }
    return report;
}

GradcheckReport gradcheck(const TapeFn& f, const std::map<std::string, Tensor>& params,
                          const GradcheckSettings& settings, int threads) {
    Tape tape(/*check_finite=*/true);
    ValueId out = f(tape, params);
    if (tape.value(out).size() != 1) out = tape.sum_all(out);
    Gradients analytic = tape.backward(out);
    return gradcheck_against(f, params, analytic, settings, threads);
}

// --- per-op randomized checks -------------------------------------------------

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    return Tensor::uniform(std::move(shape), lo, hi, rng);
}

// Values bounded away from zero, random sign: the smooth region of
// signed_sqrt and a safely nonzero vector for l2_normalize.
Tensor random_offzero(std::vector<int> shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.size(); ++i) {
        const double mag = rng.uniform(0.5, 1.5);
        t[i] = rng.bernoulli(0.5) ? mag : -mag;
    }
    return t;
}

struct OpCheck {
    std::map<std::string, Tensor> params;
    TapeFn build;
};

OpCheck make_op_check(const std::string& name, std::uint64_t seed) {
    Rng rng(seed * 0x9e3779b97f4a7c15ULL + 12345);
    OpCheck chk;
    if (name == "matmul") {
        chk.params = {{"a", random_tensor({3, 4}, rng)}, {"b", random_tensor({4, 2}, rng)}};
        chk.build = [](Tape& t, const std::map<std::string, Tensor>& p) {
            return t.matmul(t.param("a", p.at("a")), t.param("b", p.at("b")));
        };
    } else if (name == "hadamard") {
        chk.params = {{"a", random_tensor({5}, rng)}, {"b", random_tensor({5}, rng)}};
        chk.build = [](Tape& t, const std::map<std::string, Tensor>& p) {
            return t.hadamard(t.param("a", p.at("a")), t.param("b", p.at("b")));
        };
    } else if (name == "add") {
        chk.params = {{"a", random_tensor({2, 3}, rng)}, {"b", random_tensor({2, 3}, rng)}};
        chk.build = [](Tape& t, const std::map<std::string, Tensor>& p) {
            // a + b alone is too linear to exercise the adjoint; square it.
            ValueId s = t.add(t.param("a", p.at("a")), t.param("b", p.at("b")));
            return t.hadamard(s, s);
        };
    } else if (name == "sub") {
        chk.params = {{"a", random_tensor({2, 3}, rng)}, {"b", random_tensor({2, 3}, rng)}};
        chk.build = [](Tape& t, const std::map<std::string, Tensor>& p) {
            ValueId s = t.sub(t.param("a", p.at("a")), t.param("b", p.at("b")));
            return t.hadamard(s, s);
        };
    } else if (name == "scale") {
        chk.params = {{"a", random_tensor({4}, rng)}};
        chk.build = [](Tape& t, const std::map<std::string, Tensor>& p) {
            ValueId s = t.scale(t.param("a", p.at("a")), 0.75);
            return t.hadamard(s, s);
        };
    } else if (name == "relu") {
        chk.params = {{"x", random_tensor({4, 3}, rng)}};
        chk.build = [](Tape& t, const std::map<std::string, Tensor>& p) {
            ValueId y = t.relu(t.param("x", p.at("x")));
            return t.hadamard(y, y);
        };
    } else if (name == "maxpool2") {
        chk.params = {{"x", random_tensor({4, 4, 2}, rng)}};
        chk.build = [](Tape& t, const std::map<std::string, Tensor>& p) {
            ValueId y = t.maxpool2(t.param("x", p.at("x")));
            return t.hadamard(y, y);
        };
    } else if (name == "conv2d") {
        const int stride = (seed % 2 == 0) ? 1 : 2;
        chk.params = {{"x", random_tensor({5, 5, 2}, rng)},
                      {"k", random_tensor({3, 3, 2, 3}, rng)}};
        chk.build = [stride](Tape& t, const std::map<std::string, Tensor>& p) {
            ValueId y = t.conv2d(t.param("x", p.at("x")), t.param("k", p.at("k")), stride, 1);
            return t.hadamard(y, y);
        };
    } else if (name == "sum_spatial") {
        chk.params = {{"x", random_tensor({3, 4, 2}, rng)}};
        chk.build = [](Tape& t, const std::map<std::string, Tensor>& p) {
            ValueId y = t.sum_spatial(t.param("x", p.at("x")));
            return t.hadamard(y, y);
        };
    } else if (name == "reshape") {
        chk.params = {{"x", random_tensor({2, 6}, rng)}};
        chk.build = [](Tape& t, const std::map<std::string, Tensor>& p) {
            ValueId y = t.reshape(t.param("x", p.at("x")), {3, 4});
            return t.hadamard(y, y);
        };
    } else if (name == "concat") {
        chk.params = {{"a", random_tensor({2}, rng)},
                      {"b", random_tensor({3}, rng)},
                      {"c", random_tensor({4}, rng)}};
        chk.build = [](Tape& t, const std::map<std::string, Tensor>& p) {
            std::vector<ValueId> parts = {t.param("a", p.at("a")), t.param("b", p.at("b")),
                                          t.param("c", p.at("c"))};
            ValueId y = t.concat(parts);
            return t.hadamard(y, y);
        };
    } else if (name == "signed_sqrt") {
        chk.params = {{"v", random_offzero({6}, rng)}};
        chk.build = [](Tape& t, const std::map<std::string, Tensor>& p) {
            ValueId y = t.signed_sqrt(t.param("v", p.at("v")));
            return t.hadamard(y, y);
        };
    } else if (name == "l2_normalize") {
        chk.params = {{"v", random_offzero({6}, rng)}};
        chk.build = [](Tape& t, const std::map<std::string, Tensor>& p) {
            ValueId y = t.l2_normalize(t.param("v", p.at("v")));
            return t.hadamard(y, y);
        };
    } else if (name == "sum_all") {
        chk.params = {{"x", random_tensor({3, 3}, rng)}};
        chk.build = [](Tape& t, const std::map<std::string, Tensor>& p) {
            ValueId x = t.param("x", p.at("x"));
            return t.sum_all(t.hadamard(x, x));
        };
    } else if (name == "softmax_cross_entropy") {
        chk.params = {{"s", random_tensor({5}, rng, -2.0, 2.0)}};
        const int label = static_cast<int>(seed % 5);
        chk.build = [label](Tape& t, const std::map<std::string, Tensor>& p) {
            return t.softmax_cross_entropy(t.param("s", p.at("s")), label);
        };
    } else {
        throw UnsupportedOpError("no registered op named '" + name + "'");
    }
    return chk;
}

} // namespace

std::vector<std::string> registered_op_names() {
    return {"matmul",      "hadamard", "add",         "sub",
            "scale",       "relu",     "maxpool2",    "conv2d",
            "sum_spatial", "reshape",  "concat",      "signed_sqrt",
            "l2_normalize","sum_all",  "softmax_cross_entropy"};
}

GradcheckReport gradcheck_op(const std::string& op_name, std::uint64_t seed,
                             const GradcheckSettings& settings) {
    OpCheck chk = make_op_check(op_name, seed);
    return gradcheck(chk.build, chk.params, settings);
}

} // namespace hbp
