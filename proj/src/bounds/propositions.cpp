#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "zfdt/bounds.hpp"

namespace zfdt::bounds {

namespace {

constexpr double kProp1Tolerance = 1e-3;
constexpr double kProp2Tolerance = 5e-2;
constexpr double kFidelity = 0.05;
constexpr double kProp4Slack = 0.05;

/// Uniform draw in [0,1) from the top 53 bits, identical on every platform.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t draw(const std::vector<double>& weights, std::mt19937_64& rng) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = unit(rng) * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (u < weights[i]) return i;
        u -= weights[i];
    }
    // Rounding left u past the end; return the last index with mass.
    for (std::size_t i = weights.size(); i-- > 0;) {
        if (weights[i] > 0.0) return i;
    }
    return weights.size() - 1;
}

}  // namespace

double BoundReport::get(const std::string& name) const {
    for (const auto& q : quantities) {
        if (q.name == name) return q.value;
    }
    throw InvalidInput("report has no quantity " + name);
}

std::string BoundReport::to_json() const {
    nlohmann::ordered_json j;
    j["proposition"] = proposition;
    nlohmann::ordered_json q = nlohmann::ordered_json::object();
    for (const auto& x : quantities) q[x.name] = x.value;
    j["quantities"] = q;
    j["bound_lhs"] = bound_lhs;
    j["bound_rhs"] = bound_rhs;
    j["satisfied"] = satisfied;
    j["tolerance"] = tolerance;
    if (!note.empty()) j["note"] = note;
    return j.dump(2);
}

BoundReport verify_prop1(const ToyWorld& world, const BoundsConfig& config) {
    config.validate();
    world.validate();
    const double mi = mutual_information(world);
    if (mi < config.gamma_threshold) {
        throw PreconditionError("I(y;c|x) = " + std::to_string(mi) + " is below the gamma threshold");
    }
    const auto sft = train_sft(ToyModel::for_world(world, Conditioning::x_only), world, config, StepRule::backtracking);
    const auto gr = train_sft(ToyModel::for_world(world, Conditioning::x_and_c), world, config, StepRule::backtracking);
    const double e_sft = sft_loss(sft.model, world);
    const double e_gr = sft_loss(gr.model, world);
    const double gap = e_sft - e_gr;
    const bool identity = std::abs(gap - mi) <= kProp1Tolerance;
    const bool bound = e_gr <= e_sft - config.gamma_threshold + kProp1Tolerance;

    BoundReport r;
    r.proposition = 1;
    r.quantities = {
        {"E_SFT", e_sft},
        {"E_GR_SFT", e_gr},
        {"mutual_information", mi},
        {"gap", gap},
        {"identity_error", std::abs(gap - mi)},
        {"H_y_given_x", conditional_entropy(world, Conditioning::x_only)},
        {"H_y_given_xc", conditional_entropy(world, Conditioning::x_and_c)},
        {"gamma", config.gamma_threshold},
        {"beta", config.beta},
        {"rhs_gamma_over_beta", e_sft - config.gamma_threshold / config.beta},
        {"steps_x_only", static_cast<double>(sft.steps_run)},
        {"steps_x_and_c", static_cast<double>(gr.steps_run)},
    };
    r.bound_lhs = e_gr;
    r.bound_rhs = e_sft - config.gamma_threshold;
    r.tolerance = kProp1Tolerance;
    r.satisfied = identity && bound;
    r.note = "rhs_gamma_over_beta is informational; the checked bound subtracts gamma";
    return r;
}

BoundReport verify_prop2(const ToyWorld& world, const PreferenceSet& prefs, const BoundsConfig& config) {
    config.validate();
    world.validate();
    prefs.validate();
    const ToyModel& ref = prefs.reference;
    if (ref.mode != Conditioning::x_and_c || ref.nx != world.nx || ref.nc != world.nc || ref.ny != world.ny) {
        throw InvalidInput("reference must be an x_and_c model over the world's sets");
    }
    std::vector<double> w_weight;
    for (const auto& p : prefs.pairs) {
        const double pw = world.p(p.x, p.c, p.y_w);
        const double pl = world.p(p.x, p.c, p.y_l);
        if (!(pw + pl > 0.0) || std::abs(pw / (pw + pl) - 0.5) > 1e-9) {
            throw AssumptionError("preferred and rejected answers are not equally likely under the world");
        }
        w_weight.push_back(pw / (pw + pl));
    }
    const auto nll = [&](const ToyModel& m) {
        double e = 0.0;
        for (std::size_t i = 0; i < prefs.pairs.size(); ++i) {
            const auto& p = prefs.pairs[i];
            e -= w_weight[i] * m.log_prob(p.x, p.c, p.y_w) + (1.0 - w_weight[i]) * m.log_prob(p.x, p.c, p.y_l);
        }
        return e / static_cast<double>(prefs.pairs.size());
    };
    const auto dpo = train_dpo(ref, prefs, config, StepRule::fixed);
    const double e_sft = nll(ref);
    const double e_dpo = nll(dpo.model);
    const double mean_delta = prefs.mean_delta();
    double margin = 0.0;
    for (const auto& p : prefs.pairs) {
        margin += implicit_reward(dpo.model, ref, p.x, p.c, p.y_w, config.beta) -
                  implicit_reward(dpo.model, ref, p.x, p.c, p.y_l, config.beta);
    }
    margin /= static_cast<double>(prefs.pairs.size());

    BoundReport r;
    r.proposition = 2;
    r.quantities = {
        {"E_SFT", e_sft},
        {"E_DPO", e_dpo},
        {"mean_delta", mean_delta},
        {"beta", config.beta},
        {"reduction_term", mean_delta / config.beta},
        {"dpo_loss_initial", dpo.losses.front()},
        {"dpo_loss_final", dpo.losses.back()},
        {"mean_reward_margin", margin},
        {"pairs", static_cast<double>(prefs.pairs.size())},
    };
    r.bound_lhs = e_dpo;
    r.bound_rhs = e_sft - mean_delta / config.beta;
    r.tolerance = kProp2Tolerance;
    r.satisfied = r.bound_lhs <= r.bound_rhs + r.tolerance;
    return r;
}

BoundReport verify_prop3(const ToyWorld& world, const BoundsConfig& config, std::size_t trials) {
    config.validate();
    world.validate();
    if (world.nc != 2) throw InvalidInput("world must have exactly a covering and a missing context");
    if (trials == 0) throw InvalidInput("trials must be positive");
    const double epsilon = 1.0 - world.retrieval_coverage;
    const double delta = world.reliance;
    const auto trained = train_sft(ToyModel::for_world(world, Conditioning::x_and_c), world, config, StepRule::backtracking);
    const ToyModel& model = trained.model;

    std::vector<double> px(world.nx, 0.0);
    for (std::size_t x = 0; x < world.nx; ++x) {
        for (std::size_t c = 0; c < world.nc; ++c) {
            for (std::size_t y = 0; y < world.ny; ++y) px[x] += world.p(x, c, y);
        }
    }
    double expected = 0.0;
    for (std::size_t x = 0; x < world.nx; ++x) {
        for (std::size_t c = 0; c < 2; ++c) {
            const auto probs = model.probs(model.row(x, c));
            double off = 0.0;
            for (std::size_t y = 0; y < world.ny; ++y) off += world.is_fact(x, y) ? 0.0 : probs[y];
            expected += px[x] * (c == 0 ? 1.0 - epsilon : epsilon) * off;
        }
    }

    std::mt19937_64 rng(config.rng_seed);
    std::size_t hallucinated = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t x = draw(px, rng);
        const std::size_t c = unit(rng) < epsilon ? 1 : 0;
        const std::size_t y = draw(model.probs(model.row(x, c)), rng);
        if (!world.is_fact(x, y)) ++hallucinated;
    }
    const double rate = static_cast<double>(hallucinated) / static_cast<double>(trials);
    const double b = std::min(1.0, epsilon + delta);
    const double stderr_ = std::sqrt(b * (1.0 - b) / static_cast<double>(trials));

    BoundReport r;
    r.proposition = 3;
    r.quantities = {
        {"epsilon", epsilon},
        {"delta", delta},
        {"trials", static_cast<double>(trials)},
        {"hallucinated", static_cast<double>(hallucinated)},
        {"rate", rate},
        {"expected_rate", expected},
        {"binomial_stderr", stderr_},
    };
    r.bound_lhs = rate;
    r.bound_rhs = epsilon + delta;
    r.tolerance = 3.0 * stderr_;
    r.satisfied = rate <= r.bound_rhs + r.tolerance;
    return r;
}

BoundReport verify_prop4(const PreferenceSet& prefs, const BoundsConfig& config) {
    config.validate();
    prefs.validate();
    const ToyModel& ref = prefs.reference;

    struct Outcome {
        double delta;
        double p_l;
        double bound;
    };
    std::vector<Outcome> qualifying;
    std::vector<Quantity> quantities;
    for (std::size_t i = 0; i < prefs.pairs.size(); ++i) {
        const auto& p = prefs.pairs[i];
        PreferenceSet single;
        single.reference = ref;
        single.pairs = {p};
        const ToyModel trained = train_dpo(ref, single, config, StepRule::fixed).model;
        const double pw_theta = trained.prob(p.x, p.c, p.y_w);
        const double pw_ref = ref.prob(p.x, p.c, p.y_w);
        const double pl_theta = trained.prob(p.x, p.c, p.y_l);
        const double pl_ref = ref.prob(p.x, p.c, p.y_l);
        const double bound = pl_ref * std::exp(-p.delta / config.beta);
        const bool qualifies = std::abs(pw_theta - pw_ref) <= kFidelity;
        const std::string tag = "pair" + std::to_string(i) + "_";
        quantities.push_back({tag + "delta", p.delta});
        quantities.push_back({tag + "p_ref_l", pl_ref});
        quantities.push_back({tag + "p_theta_l", pl_theta});
        quantities.push_back({tag + "bound", bound});
        quantities.push_back({tag + "decay_factor", pl_theta / pl_ref});
        quantities.push_back({tag + "w_shift", pw_theta - pw_ref});
        quantities.push_back({tag + "qualifies", qualifies ? 1.0 : 0.0});
        if (qualifies) qualifying.push_back({p.delta, pl_theta, bound});
    }
    if (qualifying.empty()) throw InsufficientData("no pair meets the fidelity assumption");

    double worst = 0.0;
    for (const auto& o : qualifying) worst = std::max(worst, o.p_l / o.bound);
    std::stable_sort(qualifying.begin(), qualifying.end(), [](const Outcome& a, const Outcome& b) { return a.delta < b.delta; });
    bool monotone = true;
    for (std::size_t i = 1; i < qualifying.size(); ++i) {
        if (qualifying[i].p_l > qualifying[i - 1].p_l) monotone = false;
    }
    quantities.push_back({"qualifying_pairs", static_cast<double>(qualifying.size())});
    quantities.push_back({"monotone", monotone ? 1.0 : 0.0});
    quantities.push_back({"beta", config.beta});

    BoundReport r;
    r.proposition = 4;
    r.quantities = std::move(quantities);
    r.bound_lhs = worst;
    r.bound_rhs = 1.0;
    r.tolerance = kProp4Slack;
    r.satisfied = worst <= 1.0 + kProp4Slack && monotone;
    r.note = "bound_lhs is the largest ratio P_theta(y_l) / (P_ref(y_l) exp(-delta/beta)) over qualifying pairs";
    return r;
}

}  // namespace zfdt::bounds
