#include <algorithm>
#include <cmath>
#include <numeric>

#include "zfdt/bounds.hpp"

namespace zfdt::bounds {

namespace {

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// -log sigmoid(m).
double softplus_neg(double m) { return m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m)); }

void softmax_row(const double* logits, std::size_t n, double* out) {
    const double mx = *std::max_element(logits, logits + n);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::exp(logits[i] - mx);
        z += out[i];
    }
    for (std::size_t i = 0; i < n; ++i) out[i] /= z;
}

double log_softmax_at(const double* logits, std::size_t n, std::size_t y) {
    const double mx = *std::max_element(logits, logits + n);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) z += std::exp(logits[i] - mx);
    return logits[y] - mx - std::log(z);
}

void check_pair_ranges(const ToyModel& m, const PreferencePair& p) {
    if (p.x >= m.nx || p.c >= m.nc || p.y_w >= m.ny || p.y_l >= m.ny) throw InvalidInput("preference pair out of range");
    if (p.y_w == p.y_l) throw InvalidInput("preference pair with y_w == y_l");
}

}  // namespace

bool ToyWorld::is_fact(std::size_t x, std::size_t y) const {
    const auto& f = fact_map.at(x);
    return std::find(f.begin(), f.end(), y) != f.end();
}

void ToyWorld::validate() const {
    if (nx == 0 || nc == 0 || ny == 0) throw InvalidInput("world sets must be non-empty");
    if (joint.size() != nx * nc * ny) throw InvalidInput("joint table has the wrong size");
    double sum = 0.0;
    for (double v : joint) {
        if (!(v >= 0.0)) throw InvalidInput("joint has a negative or NaN entry");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw InvalidInput("joint does not sum to 1");
    if (fact_map.size() != nx) throw InvalidInput("fact map must cover every x");
    for (const auto& f : fact_map) {
        if (f.empty()) throw InvalidInput("empty fact set");
        for (std::size_t y : f) {
            if (y >= ny) throw InvalidInput("fact out of range");
        }
    }
}

ToyModel ToyModel::zeros(Conditioning mode, std::size_t nx, std::size_t nc, std::size_t ny) {
    ToyModel m;
    m.mode = mode;
    m.nx = nx;
    m.nc = nc;
    m.ny = ny;
    m.logits.assign(m.rows() * ny, 0.0);
    return m;
}

ToyModel ToyModel::for_world(const ToyWorld& world, Conditioning mode) { return zeros(mode, world.nx, world.nc, world.ny); }

std::vector<double> ToyModel::probs(std::size_t r) const {
    std::vector<double> out(ny);
    softmax_row(&logits.at(r * ny), ny, out.data());
    return out;
}

double ToyModel::prob(std::size_t x, std::size_t c, std::size_t y) const { return std::exp(log_prob(x, c, y)); }

double ToyModel::log_prob(std::size_t x, std::size_t c, std::size_t y) const {
    return log_softmax_at(&logits.at(row(x, c) * ny), ny, y);
}

void BoundsConfig::validate() const {
    if (!(beta > 0.0)) throw ConfigError("beta must be positive");
    if (!(gamma_threshold > 0.0)) throw ConfigError("gamma threshold must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (steps == 0) throw ConfigError("steps must be positive");
}

PreferenceSet PreferenceSet::build(ToyModel reference, std::vector<PreferencePair> pairs) {
    PreferenceSet s;
    s.reference = std::move(reference);
    for (auto& p : pairs) {
        check_pair_ranges(s.reference, p);
        p.delta = s.reference.log_prob(p.x, p.c, p.y_w) - s.reference.log_prob(p.x, p.c, p.y_l);
    }
    s.pairs = std::move(pairs);
    return s;
}

void PreferenceSet::validate() const {
    if (pairs.empty()) throw InvalidInput("preference set is empty");
    for (const auto& p : pairs) {
        check_pair_ranges(reference, p);
        const double d = reference.log_prob(p.x, p.c, p.y_w) - reference.log_prob(p.x, p.c, p.y_l);
        if (std::abs(d - p.delta) > 1e-9) throw InvalidInput("preference strength does not match the reference");
    }
}

double PreferenceSet::mean_delta() const {
    if (pairs.empty()) throw InvalidInput("preference set is empty");
    double s = 0.0;
    for (const auto& p : pairs) s += p.delta;
    return s / static_cast<double>(pairs.size());
}

double mutual_information(const ToyWorld& world) {
    world.validate();
    double mi = 0.0;
    for (std::size_t x = 0; x < world.nx; ++x) {
        double px = 0.0;
        std::vector<double> pxy(world.ny, 0.0);
        for (std::size_t c = 0; c < world.nc; ++c) {
            for (std::size_t y = 0; y < world.ny; ++y) {
                px += world.p(x, c, y);
                pxy[y] += world.p(x, c, y);
            }
        }
        for (std::size_t c = 0; c < world.nc; ++c) {
            double pxc = 0.0;
            for (std::size_t y = 0; y < world.ny; ++y) pxc += world.p(x, c, y);
            for (std::size_t y = 0; y < world.ny; ++y) {
                const double pj = world.p(x, c, y);
                if (pj <= 0.0) continue;
                mi += pj * std::log((pj / pxc) / (pxy[y] / px));
            }
        }
    }
    return std::max(0.0, mi);
}

double conditional_entropy(const ToyWorld& world, Conditioning mode) {
    world.validate();
    double h = 0.0;
    for (std::size_t x = 0; x < world.nx; ++x) {
        if (mode == Conditioning::x_only) {
            double px = 0.0;
            std::vector<double> pxy(world.ny, 0.0);
            for (std::size_t c = 0; c < world.nc; ++c) {
                for (std::size_t y = 0; y < world.ny; ++y) {
                    px += world.p(x, c, y);
                    pxy[y] += world.p(x, c, y);
                }
            }
            for (double v : pxy) {
                if (v > 0.0) h -= v * std::log(v / px);
            }
        } else {
            for (std::size_t c = 0; c < world.nc; ++c) {
                double pxc = 0.0;
                for (std::size_t y = 0; y < world.ny; ++y) pxc += world.p(x, c, y);
                for (std::size_t y = 0; y < world.ny; ++y) {
                    const double v = world.p(x, c, y);
                    if (v > 0.0) h -= v * std::log(v / pxc);
                }
            }
        }
    }
    return h;
}

namespace {

void check_shapes(const ToyModel& model, const ToyWorld& world) {
    if (model.nx != world.nx || model.nc != world.nc || model.ny != world.ny) {
        throw InvalidInput("model and world shapes differ");
    }
    if (model.logits.size() != model.rows() * model.ny) throw InvalidInput("model logit table has the wrong size");
}

}  // namespace

double sft_loss(const ToyModel& model, const ToyWorld& world, bool* clamped) {
    check_shapes(model, world);
    const double floor_log = std::log(kLogFloor);
    bool hit_floor = false;
    double loss = 0.0;
    for (std::size_t x = 0; x < world.nx; ++x) {
        for (std::size_t c = 0; c < world.nc; ++c) {
            for (std::size_t y = 0; y < world.ny; ++y) {
                const double pj = world.p(x, c, y);
                if (pj <= 0.0) continue;
                double lp = model.log_prob(x, c, y);
                if (lp < floor_log) {
                    lp = floor_log;
                    hit_floor = true;
                }
                loss -= pj * lp;
            }
        }
    }
    if (clamped) *clamped = hit_floor;
    return loss;
}

std::vector<double> sft_gradient(const ToyModel& model, const ToyWorld& world) {
    check_shapes(model, world);
    std::vector<double> grad(model.logits.size(), 0.0);
    std::vector<double> p(model.ny);
    for (std::size_t x = 0; x < world.nx; ++x) {
        for (std::size_t c = 0; c < world.nc; ++c) {
            const std::size_t r = model.row(x, c);
            softmax_row(&model.logits[r * model.ny], model.ny, p.data());
            double mass = 0.0;
            for (std::size_t y = 0; y < world.ny; ++y) mass += world.p(x, c, y);
            for (std::size_t y = 0; y < world.ny; ++y) grad[r * model.ny + y] += mass * p[y] - world.p(x, c, y);
        }
    }
    return grad;
}

namespace {

double pair_margin(const ToyModel& model, const PreferenceSet& prefs, const PreferencePair& p, double beta,
                   bool asymmetric) {
    const double lr_w = model.log_prob(p.x, p.c, p.y_w) - prefs.reference.log_prob(p.x, p.c, p.y_w);
    const double lr_l = model.log_prob(p.x, p.c, p.y_l) - prefs.reference.log_prob(p.x, p.c, p.y_l);
    return asymmetric ? beta * lr_w - lr_l : beta * (lr_w - lr_l);
}

void check_dpo(const ToyModel& model, const PreferenceSet& prefs, double beta) {
    if (prefs.pairs.empty()) throw InvalidInput("preference set is empty");
    if (!(beta > 0.0)) throw InvalidInput("beta must be positive");
    const ToyModel& ref = prefs.reference;
    if (model.mode != ref.mode || model.nx != ref.nx || model.nc != ref.nc || model.ny != ref.ny) {
        throw InvalidInput("model and reference shapes differ");
    }
}

}  // namespace

double dpo_loss(const ToyModel& model, const PreferenceSet& prefs, double beta, bool asymmetric) {
    check_dpo(model, prefs, beta);
    double loss = 0.0;
    for (const auto& p : prefs.pairs) loss += softplus_neg(pair_margin(model, prefs, p, beta, asymmetric));
    return loss / static_cast<double>(prefs.pairs.size());
}

std::vector<double> dpo_gradient(const ToyModel& model, const PreferenceSet& prefs, double beta, bool asymmetric) {
    check_dpo(model, prefs, beta);
    std::vector<double> grad(model.logits.size(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(prefs.pairs.size());
    std::vector<double> prob(model.ny);
    for (const auto& p : prefs.pairs) {
        const double m = pair_margin(model, prefs, p, beta, asymmetric);
        const double outer = -sigmoid(-m) * inv_n;
        const std::size_t r = model.row(p.x, p.c);
        double* g = &grad[r * model.ny];
        if (asymmetric) {
            softmax_row(&model.logits[r * model.ny], model.ny, prob.data());
            for (std::size_t y = 0; y < model.ny; ++y) {
                const double dw = (y == p.y_w ? 1.0 : 0.0) - prob[y];
                const double dl = (y == p.y_l ? 1.0 : 0.0) - prob[y];
                g[y] += outer * (beta * dw - dl);
            }
        } else {
            // The softmax normalizer cancels in lr_w - lr_l.
            g[p.y_w] += outer * beta;
            g[p.y_l] -= outer * beta;
        }
    }
    return grad;
}

double implicit_reward(const ToyModel& model, const ToyModel& ref, std::size_t x, std::size_t c, std::size_t y,
                       double beta) {
    if (model.mode != ref.mode || model.ny != ref.ny || model.nx != ref.nx || model.nc != ref.nc) {
        throw InvalidInput("model and reference shapes differ");
    }
    return beta * (model.log_prob(x, c, y) - ref.log_prob(x, c, y));
}

}  // namespace zfdt::bounds
