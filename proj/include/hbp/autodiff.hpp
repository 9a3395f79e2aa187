#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hbp/tensor.hpp"

namespace hbp {

using ValueId = std::size_t;

/// Gradient of a scalar with respect to named differentiable leaves.
/// Every differentiable leaf of the tape gets an entry, zero-filled when no
/// path reaches the output, with the exact shape of the leaf value.
struct Gradients {
    std::map<std::string, Tensor> by_name;

    bool contains(const std::string& name) const { return by_name.count(name) > 0; }
    const Tensor& at(const std::string& name) const;
};

void accumulate(Gradients& into, const Gradients& delta);
void scale_in_place(Gradients& g, double factor);

/// Hash of the decisions taken at the non-smooth points of a forward pass
/// (ReLU sign patterns, maxpool winners, signed-sqrt signs), plus a flag for
/// evaluations that came numerically close to a signed-sqrt kink. Two
/// finite-difference evaluations are only comparable when their fingerprints
/// match and neither is hazardous.
struct FdFingerprint {
    std::uint64_t signature = 0;
    bool hazard = false;

    bool comparable_with(const FdFingerprint& other) const {
        return !hazard && !other.hazard && signature == other.signature;
    }
};

/// Records a forward computation over the registered op set and replays it
/// in exact reverse order for reverse-mode differentiation. Values are held
/// in creation-order slots; the recorded graph is a DAG by construction.
/// A tape is confined to the thread that builds it. backward() is const and
/// repeatable: it never mutates recorded state.
class Tape {
public:
    explicit Tape(bool check_finite = false) : check_finite_(check_finite) {}

    // Leaves. Differentiable leaves must carry unique names; those names key
    // the Gradients produced by backward().
    ValueId param(const std::string& name, Tensor value);
    ValueId constant(Tensor value);

    // Registered ops. Forward values are computed eagerly with the
    // tensor-core kernels, so a recorded computation matches the plain
    // kernel calls bit for bit.
    ValueId matmul(ValueId a, ValueId b);
    ValueId hadamard(ValueId a, ValueId b);
    ValueId add(ValueId a, ValueId b);
    ValueId sub(ValueId a, ValueId b);
    ValueId scale(ValueId a, double factor);
    ValueId relu(ValueId x);
    ValueId maxpool2(ValueId x);
    ValueId conv2d(ValueId input, ValueId kernels, int stride, int pad);
    /// Sum over locations: accepts h×w×d (rank 3) or n×d (rank 2), yields [d].
    ValueId sum_spatial(ValueId x);
    ValueId reshape(ValueId x, std::vector<int> shape);
    /// Concatenation of rank-1 tensors in argument order.
    ValueId concat(std::span<const ValueId> parts);
    /// sign(v)·sqrt(|v|) elementwise; derivative at 0 taken as 0.
    ValueId signed_sqrt(ValueId v);
    /// v / ||v||2, mapping the zero vector to itself.
    ValueId l2_normalize(ValueId v);
    /// Scalar sum of all elements.
    ValueId sum_all(ValueId x);
    /// Softmax cross-entropy of a score vector against a class index,
    /// max-shifted for stability. Scalar output.
    ValueId softmax_cross_entropy(ValueId scores, int label);

    const Tensor& value(ValueId id) const;
    std::size_t node_count() const { return nodes_.size(); }

    /// d(seed · value(output)) / d(leaf) for every differentiable leaf.
    /// seed must match the output value's shape.
    Gradients backward(ValueId output, const Tensor& seed) const;
    /// Convenience for scalar outputs: seed = [1].
    Gradients backward(ValueId output) const;

    FdFingerprint fd_fingerprint() const;

private:
    enum class Op {
        leaf,
        matmul,
        hadamard,
        add,
        sub,
        scale,
        relu,
        maxpool2,
        conv2d,
        sum_spatial,
        reshape,
        concat,
        signed_sqrt,
        l2_normalize,
        sum_all,
        softmax_cross_entropy,
    };

    struct Node {
        Op op;
        std::vector<ValueId> inputs;
        Tensor value;
        // forward context for the backward pass
        double factor = 0.0;                  // scale
        int stride = 1, pad = 0;              // conv2d
        std::vector<std::int64_t> argmax;     // maxpool2
        Tensor saved;                         // conv2d patch matrix, softmax probs
        int label = -1;                       // softmax_cross_entropy
        std::string name;                     // leaf
        bool differentiable = false;          // leaf
    };

    ValueId push(Node node);
    const Node& node(ValueId id) const;
    void check_id(ValueId id) const;

    std::vector<Node> nodes_;
    std::map<std::string, ValueId> leaf_names_;
    bool check_finite_ = false;
};

// --- finite-difference verification ----------------------------------------

struct GradcheckSettings {
    double epsilon = 1e-5;
    double tolerance = 1e-5;
};

struct GradcheckReport {
    struct ParamStat {
        std::string name;
        double max_rel_err = 0.0;
        std::int64_t checked = 0;
        std::int64_t skipped = 0;  // coordinates straddling a kink
        bool pass = true;
    };
    std::vector<ParamStat> params;
    double tolerance = 0.0;
    double epsilon = 0.0;

    bool pass() const;
    std::string summary() const;
};

/// Builds the computation under test on a fresh tape from the given
/// parameter values and returns the output id. Non-scalar outputs are summed
/// by the checker.
using TapeFn = std::function<ValueId(Tape&, const std::map<std::string, Tensor>&)>;

/// Central-difference check of the tape gradient of f against
/// (f(θ+ε)−f(θ−ε))/2ε per coordinate, relative error
/// |g_ad − g_fd| / (|g_ad| + |g_fd| + 1e-12). Coordinates whose perturbed
/// runs disagree on a kink decision are skipped.
GradcheckReport gradcheck(const TapeFn& f, const std::map<std::string, Tensor>& params,
                          const GradcheckSettings& settings = {}, int threads = 1);

/// Same, but verifies caller-supplied analytic gradients instead of running
/// backward(). gradcheck() delegates here.
GradcheckReport gradcheck_against(const TapeFn& f, const std::map<std::string, Tensor>& params,
                                  const Gradients& analytic, const GradcheckSettings& settings = {},
                                  int threads = 1);

/// Names of all registered ops with a standalone randomized check.
std::vector<std::string> registered_op_names();

/// Randomized gradcheck of one registered op by name; inputs are drawn from
/// the op's smooth region. Throws UnsupportedOpError for unknown names.
GradcheckReport gradcheck_op(const std::string& op_name, std::uint64_t seed,
                             const GradcheckSettings& settings = {});

} // namespace hbp
