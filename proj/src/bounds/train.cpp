#include <algorithm>
#include <cmath>
#include <numeric>

#include "zfdt/bounds.hpp"

namespace zfdt::bounds {

namespace {

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

double squared_norm(const std::vector<double>& v) { return std::inner_product(v.begin(), v.end(), v.begin(), 0.0); }

std::vector<double> axpy(const std::vector<double>& x, double a, const std::vector<double>& d) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + a * d[i];
    return out;
}

constexpr double kGradTol = 1e-12;
constexpr double kArmijo = 1e-4;
constexpr double kMaxStep = 1e8;
constexpr double kMinStep = 1e-20;

TrainResult run(const ToyModel& init, const LossFn& loss, const GradFn& grad, const BoundsConfig& config, StepRule rule) {
    config.validate();
    TrainResult result;
    std::vector<double> theta = init.logits;
    std::vector<double> stable = theta;
    double prev = loss(theta);
    if (!std::isfinite(prev)) throw InvalidInput("initial loss is not finite");
    result.losses.push_back(prev);
    int rises = 0;
    double step = config.learning_rate;
    for (std::size_t t = 0; t < config.steps; ++t) {
        const std::vector<double> g = grad(theta);
        if (max_abs(g) < kGradTol) break;
        if (rule == StepRule::fixed) {
            theta = axpy(theta, -config.learning_rate, g);
        } else {
            const double gg = squared_norm(g);
            step = std::min(2.0 * step, kMaxStep);
            std::vector<double> trial = axpy(theta, -step, g);
            double value = loss(trial);
            while (!(value <= prev - kArmijo * step * gg) && step > kMinStep) {
                step *= 0.5;
                trial = axpy(theta, -step, g);
                value = loss(trial);
            }
            if (step <= kMinStep) break;
            theta = std::move(trial);
        }
        ++result.steps_run;
        const double current = loss(theta);
        if (!std::isfinite(current)) {
            ToyModel last = init;
            last.logits = stable;
            throw DivergenceError("loss became non-finite", std::move(last));
        }
        if (current > prev + 1e-12 * std::max(1.0, std::abs(prev))) {
            if (++rises >= 3) {
                ToyModel last = init;
                last.logits = stable;
                throw DivergenceError("loss rose for three consecutive steps", std::move(last));
            }
        } else {
            rises = 0;
            stable = theta;
        }
        result.losses.push_back(current);
        prev = current;
    }
    result.model = init;
    result.model.logits = std::move(theta);
    return result;
}

}  // namespace

TrainResult train_sft(const ToyModel& init, const ToyWorld& world, const BoundsConfig& config, StepRule rule) {
    world.validate();
    ToyModel scratch = init;
    const LossFn loss = [&](const std::vector<double>& th) {
        scratch.logits = th;
        return sft_loss(scratch, world);
    };
    const GradFn grad = [&](const std::vector<double>& th) {
        scratch.logits = th;
        return sft_gradient(scratch, world);
    };
    return run(init, loss, grad, config, rule);
}

TrainResult train_dpo(const ToyModel& init, const PreferenceSet& prefs, const BoundsConfig& config, StepRule rule) {
    prefs.validate();
    ToyModel scratch = init;
    const LossFn loss = [&](const std::vector<double>& th) {
        scratch.logits = th;
        return dpo_loss(scratch, prefs, config.beta, config.asymmetric_margin);
    };
    const GradFn grad = [&](const std::vector<double>& th) {
        scratch.logits = th;
        return dpo_gradient(scratch, prefs, config.beta, config.asymmetric_margin);
    };
    return run(init, loss, grad, config, rule);
}

double smoothness_probe(const LossFn& loss, const GradFn& grad, const std::vector<double>& theta, std::uint64_t seed,
                        std::size_t probes) {
    (void)loss;
    constexpr double h = 1e-4;
    const std::vector<double> g0 = grad(theta);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    double worst = 0.0;
    for (std::size_t k = 0; k <= probes; ++k) {
        std::vector<double> d(theta.size());
        if (k == 0) {
            d = g0;
        } else {
            for (auto& v : d) v = normal(rng);
        }
        const double n = std::sqrt(squared_norm(d));
        if (n == 0.0) continue;
        for (auto& v : d) v /= n;
        const std::vector<double> g1 = grad(axpy(theta, h, d));
        double diff = 0.0;
        for (std::size_t i = 0; i < d.size(); ++i) diff += (g1[i] - g0[i]) * (g1[i] - g0[i]);
        worst = std::max(worst, std::sqrt(diff) / h);
    }
    return worst;
}

GradientCheck check_gradient(const LossFn& loss, const GradFn& grad, const std::vector<double>& theta, double fraction,
                             std::uint64_t seed, double h) {
    if (theta.empty()) throw InvalidInput("no parameters to check");
    if (!(fraction > 0.0 && fraction <= 1.0)) throw InvalidInput("fraction must lie in (0,1]");
    const std::vector<double> analytic = grad(theta);
    std::vector<std::size_t> idx(theta.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto count = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(theta.size()))));
    GradientCheck out;
    std::vector<double> probe = theta;
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t i = idx[k];
        probe[i] = theta[i] + h;
        const double up = loss(probe);
        probe[i] = theta[i] - h;
        const double down = loss(probe);
        probe[i] = theta[i];
        const double numeric = (up - down) / (2.0 * h);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
        out.max_rel_error = std::max(out.max_rel_error, std::abs(analytic[i] - numeric) / denom);
        ++out.checked;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Worlds

namespace {

std::vector<double> dirichlet_ones(std::size_t n, std::mt19937_64& rng) {
    std::exponential_distribution<double> e(1.0);
    std::vector<double> v(n);
    double s = 0.0;
    for (auto& x : v) {
        x = e(rng);
        s += x;
    }
    for (auto& x : v) x /= s;
    return v;
}

ToyWorld empty_world(std::size_t nx, std::size_t nc, std::size_t ny) {
    ToyWorld w;
    w.nx = nx;
    w.nc = nc;
    w.ny = ny;
    w.joint.assign(nx * nc * ny, 0.0);
    w.fact_map.assign(nx, {});
    return w;
}

double& at(ToyWorld& w, std::size_t x, std::size_t c, std::size_t y) { return w.joint[(x * w.nc + c) * w.ny + y]; }

/// Rescales the joint so it sums to 1 after independent rounding.
void renormalize(ToyWorld& w) {
    const double s = std::accumulate(w.joint.begin(), w.joint.end(), 0.0);
    for (auto& v : w.joint) v /= s;
}

}  // namespace

ToyWorld random_world(std::size_t nx, std::size_t nc, std::size_t ny, std::mt19937_64& rng) {
    if (nx == 0 || nc == 0 || ny == 0) throw InvalidInput("world sets must be non-empty");
    ToyWorld w = empty_world(nx, nc, ny);
    const auto px = dirichlet_ones(nx, rng);
    for (std::size_t x = 0; x < nx; ++x) {
        const auto pc = dirichlet_ones(nc, rng);
        for (std::size_t c = 0; c < nc; ++c) {
            const auto py = dirichlet_ones(ny, rng);
            for (std::size_t y = 0; y < ny; ++y) at(w, x, c, y) = px[x] * pc[c] * py[y];
        }
    }
    renormalize(w);
    for (std::size_t x = 0; x < nx; ++x) {
        std::size_t best = 0;
        double best_p = -1.0;
        for (std::size_t y = 0; y < ny; ++y) {
            double p = 0.0;
            for (std::size_t c = 0; c < nc; ++c) p += w.p(x, c, y);
            if (p > best_p) {
                best_p = p;
                best = y;
            }
        }
        w.fact_map[x] = {best};
    }
    return w;
}

ToyWorld one_bit_world(std::size_t nx) {
    ToyWorld w = empty_world(nx, 2, 2);
    for (std::size_t x = 0; x < nx; ++x) {
        for (std::size_t c = 0; c < 2; ++c) at(w, x, c, c) = 0.5 / static_cast<double>(nx);
        w.fact_map[x] = {0, 1};
    }
    return w;
}

ToyWorld independent_world(std::size_t nx, std::size_t nc, std::size_t ny) {
    ToyWorld w = empty_world(nx, nc, ny);
    for (std::size_t x = 0; x < nx; ++x) {
        double z = 0.0;
        for (std::size_t y = 0; y < ny; ++y) z += static_cast<double>(x + y + 1);
        for (std::size_t c = 0; c < nc; ++c) {
            for (std::size_t y = 0; y < ny; ++y) {
                at(w, x, c, y) = static_cast<double>(x + y + 1) / z / static_cast<double>(nx * nc);
            }
        }
        w.fact_map[x] = {ny - 1};
    }
    renormalize(w);
    return w;
}

ToyWorld hallucination_world(double epsilon, double delta, std::size_t nx, std::size_t ny) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0) || !(delta >= 0.0 && delta <= 1.0)) {
        throw InvalidInput("epsilon and delta must lie in [0,1]");
    }
    if (nx == 0 || ny < 2) throw InvalidInput("need at least one context and two answers");
    ToyWorld w = empty_world(nx, 2, ny);
    w.retrieval_coverage = 1.0 - epsilon;
    w.reliance = delta;
    const double px = 1.0 / static_cast<double>(nx);
    const double others = static_cast<double>(ny - 1);
    for (std::size_t x = 0; x < nx; ++x) {
        const std::size_t fact = x % ny;
        w.fact_map[x] = {fact};
        for (std::size_t y = 0; y < ny; ++y) {
            const double covered = y == fact ? 1.0 - delta : delta / others;
            const double missed = y == fact ? 0.0 : 1.0 / others;
            at(w, x, 0, y) = px * (1.0 - epsilon) * covered;
            at(w, x, 1, y) = px * epsilon * missed;
        }
    }
    renormalize(w);
    return w;
}

ToyWorld uniform_preference_world(std::size_t nx, std::size_t nc, std::size_t ny) {
    if (ny < 2) throw InvalidInput("need at least two answers");
    ToyWorld w = empty_world(nx, nc, ny);
    const double cell = 1.0 / static_cast<double>(nx * nc);
    for (std::size_t x = 0; x < nx; ++x) {
        for (std::size_t c = 0; c < nc; ++c) {
            at(w, x, c, 0) = 0.5 * cell;
            at(w, x, c, 1) = 0.5 * cell;
        }
        w.fact_map[x] = {0};
    }
    return w;
}

std::vector<PreferencePair> uniform_preference_pairs(const ToyWorld& world) {
    std::vector<PreferencePair> pairs;
    for (std::size_t x = 0; x < world.nx; ++x) {
        for (std::size_t c = 0; c < world.nc; ++c) pairs.push_back({x, c, 0, 1, 0.0});
    }
    return pairs;
}

PreferenceSet suppression_sweep(const std::vector<double>& deltas, double p_w) {
    if (deltas.empty()) throw InvalidInput("empty sweep");
    if (!(p_w > 0.0 && p_w < 1.0)) throw InvalidInput("p_w must lie in (0,1)");
    ToyModel ref = ToyModel::zeros(Conditioning::x_and_c, deltas.size(), 1, 3);
    std::vector<PreferencePair> pairs;
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        ref.logits[i * 3 + 0] = 0.0;
        ref.logits[i * 3 + 1] = std::log(p_w);
        ref.logits[i * 3 + 2] = std::log(p_w) - deltas[i];
        pairs.push_back({i, 0, 1, 2, 0.0});
    }
    return PreferenceSet::build(std::move(ref), std::move(pairs));
}

}  // namespace zfdt::bounds
