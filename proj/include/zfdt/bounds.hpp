#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "zfdt/errors.hpp"

namespace zfdt::bounds {

// ---------------------------------------------------------------------------
// Worlds and models

/// Exact joint table P(x, c, y) over finite sets, indexed (x * nc + c) * ny + y.
struct ToyWorld {
    std::size_t nx = 0;
    std::size_t nc = 0;
    std::size_t ny = 0;
    std::vector<double> joint;
    std::vector<std::vector<std::size_t>> fact_map;  // x -> relevant answers F_x
    double retrieval_coverage = 1.0;                 // 1 - epsilon
    double reliance = 0.0;                           // delta

    double p(std::size_t x, std::size_t c, std::size_t y) const { return joint[(x * nc + c) * ny + y]; }
    bool is_fact(std::size_t x, std::size_t y) const;
    /// Throws InvalidInput unless the joint sums to 1 (1e-12), is non-negative,
    /// and every F_x is non-empty and in range.
    void validate() const;
};

enum class Conditioning { x_only, x_and_c };

/// Logit table: one row of |Y| logits per context key (x, or (x, c)).
struct ToyModel {
    Conditioning mode = Conditioning::x_and_c;
    std::size_t nx = 0;
    std::size_t nc = 0;
    std::size_t ny = 0;
    std::vector<double> logits;

    static ToyModel zeros(Conditioning mode, std::size_t nx, std::size_t nc, std::size_t ny);
    static ToyModel for_world(const ToyWorld& world, Conditioning mode);

    std::size_t rows() const { return mode == Conditioning::x_only ? nx : nx * nc; }
    std::size_t row(std::size_t x, std::size_t c) const { return mode == Conditioning::x_only ? x : x * nc + c; }
    std::vector<double> probs(std::size_t row) const;
    double prob(std::size_t x, std::size_t c, std::size_t y) const;
    double log_prob(std::size_t x, std::size_t c, std::size_t y) const;
};

struct BoundsConfig {
    double beta = 0.2;
    double gamma_threshold = 0.1;
    double learning_rate = 0.1;
    std::size_t steps = 5000;
    std::uint64_t rng_seed = 42;
    bool asymmetric_margin = false;  // beta on the first log-ratio only

    /// Throws ConfigError for non-positive beta, gamma, learning rate or steps.
    void validate() const;
};

struct PreferencePair {
    std::size_t x = 0;
    std::size_t c = 0;
    std::size_t y_w = 0;
    std::size_t y_l = 0;
    double delta = 0.0;  // log P_ref(y_w|x,c) - log P_ref(y_l|x,c)
};

struct PreferenceSet {
    std::vector<PreferencePair> pairs;
    ToyModel reference;

    /// Fills in delta from the reference model. Throws InvalidInput for y_w == y_l.
    static PreferenceSet build(ToyModel reference, std::vector<PreferencePair> pairs);
    /// Throws InvalidInput for an empty set, y_w == y_l or a stale delta (1e-9).
    void validate() const;
    double mean_delta() const;
};

class DivergenceError : public Error {
public:
    DivergenceError(const std::string& message, ToyModel last_stable)
        : Error("DivergenceError", message), last_stable_(std::move(last_stable)) {}

    const ToyModel& last_stable() const noexcept { return last_stable_; }

private:
    ToyModel last_stable_;
};

// ---------------------------------------------------------------------------
// Information quantities and losses

/// I(y; c | x) in nats by exact summation.
double mutual_information(const ToyWorld& world);
/// H(y | x) or H(y | x, c) in nats.
double conditional_entropy(const ToyWorld& world, Conditioning mode);

inline constexpr double kLogFloor = 1e-12;

/// Expected negative log-likelihood under the joint. A zero-probability target
/// is clamped at log(kLogFloor) and reported through `clamped`.
double sft_loss(const ToyModel& model, const ToyWorld& world, bool* clamped = nullptr);
std::vector<double> sft_gradient(const ToyModel& model, const ToyWorld& world);

/// Mean over pairs of -log sigmoid(beta * (lr_w - lr_l)), lr = log P_theta / P_ref.
/// With `asymmetric` the margin is beta * lr_w - lr_l.
double dpo_loss(const ToyModel& model, const PreferenceSet& prefs, double beta, bool asymmetric = false);
std::vector<double> dpo_gradient(const ToyModel& model, const PreferenceSet& prefs, double beta, bool asymmetric = false);

/// beta * log(P_theta(y|x,c) / P_ref(y|x,c)).
double implicit_reward(const ToyModel& model, const ToyModel& ref, std::size_t x, std::size_t c, std::size_t y,
                       double beta);

// ---------------------------------------------------------------------------
// Training

enum class Objective { sft, dpo };

/// fixed: theta -= eta * grad, divergence when the loss rises three steps in a row.
/// backtracking: Armijo line search starting from twice the previous step.
enum class StepRule { fixed, backtracking };

using LossFn = std::function<double(const std::vector<double>&)>;
using GradFn = std::function<std::vector<double>(const std::vector<double>&)>;

struct TrainResult {
    ToyModel model;
    std::vector<double> losses;  // loss before each step, then the final loss
    std::size_t steps_run = 0;
};

/// Full-batch gradient descent on the logits for `config.steps` steps. Stops
/// early once the gradient max-norm drops below 1e-12. Throws DivergenceError.
TrainResult train_sft(const ToyModel& init, const ToyWorld& world, const BoundsConfig& config,
                      StepRule rule = StepRule::fixed);
TrainResult train_dpo(const ToyModel& init, const PreferenceSet& prefs, const BoundsConfig& config,
                      StepRule rule = StepRule::fixed);

/// Largest directional curvature seen along the gradient and random directions
/// by finite-difference probes of the gradient; 1 / result is a safe fixed step.
double smoothness_probe(const LossFn& loss, const GradFn& grad, const std::vector<double>& theta, std::uint64_t seed,
                        std::size_t probes = 8);

struct GradientCheck {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
};

/// Central differences on a seeded sample of `fraction` of the coordinates
/// (at least one). Relative error uses max(|analytic|, |numeric|, 1e-6).
GradientCheck check_gradient(const LossFn& loss, const GradFn& grad, const std::vector<double>& theta,
                             double fraction, std::uint64_t seed, double h = 1e-5);

// ---------------------------------------------------------------------------
// Worlds used by the verifications

/// Random joint with Dirichlet(1) marginals over x, c|x and y|x,c; F_x is the
/// most likely answer under x.
ToyWorld random_world(std::size_t nx, std::size_t nc, std::size_t ny, std::mt19937_64& rng);
/// c reveals y exactly; y uniform over two answers for each x.
ToyWorld one_bit_world(std::size_t nx = 2);
/// c independent of y given x.
ToyWorld independent_world(std::size_t nx = 2, std::size_t nc = 2, std::size_t ny = 3);
/// Contexts {covering, missing}: the retriever covers F_x with probability
/// 1 - epsilon; with coverage the answer leaves F_x with probability delta;
/// without it the answer is uniform outside F_x.
ToyWorld hallucination_world(double epsilon, double delta, std::size_t nx = 3, std::size_t ny = 6);
/// Every (x, c) splits its mass evenly between answers 0 and 1.
ToyWorld uniform_preference_world(std::size_t nx = 2, std::size_t nc = 2, std::size_t ny = 3);
/// One pair per (x, c) of the world: y_w = 0, y_l = 1.
std::vector<PreferencePair> uniform_preference_pairs(const ToyWorld& world);
/// Reference rows (0, log p_w, log p_w - delta_i) over three answers, one row per delta.
PreferenceSet suppression_sweep(const std::vector<double>& deltas, double p_w = 1e-6);

// ---------------------------------------------------------------------------
// Verifications

struct Quantity {
    std::string name;
    double value;
};

struct BoundReport {
    int proposition = 0;
    std::vector<Quantity> quantities;
    double bound_lhs = 0.0;
    double bound_rhs = 0.0;
    bool satisfied = false;
    double tolerance = 0.0;
    std::string note;

    double get(const std::string& name) const;
    std::string to_json() const;
};

/// Trains both conditioning modes to convergence; checks the identity
/// E_SFT - E_GR+SFT = I(y;c|x) within 1e-3 and E_GR+SFT <= E_SFT - gamma
/// (within 1e-3). Throws PreconditionError when I < gamma_threshold.
BoundReport verify_prop1(const ToyWorld& world, const BoundsConfig& config);

/// Pair-restricted NLL with the world's indicator weights. Throws
/// AssumptionError unless each pair's world mass is split evenly.
BoundReport verify_prop2(const ToyWorld& world, const PreferenceSet& prefs, const BoundsConfig& config);

/// Samples from the trained x_and_c model through a retriever that misses F_x
/// with probability epsilon.
BoundReport verify_prop3(const ToyWorld& world, const BoundsConfig& config, std::size_t trials);

/// Trains each pair separately from the reference; checks the suppression
/// bound on pairs whose P(y_w) moved by at most 0.05 and monotone suppression
/// in delta. Throws InsufficientData when no pair qualifies.
BoundReport verify_prop4(const PreferenceSet& prefs, const BoundsConfig& config);

}  // namespace zfdt::bounds
