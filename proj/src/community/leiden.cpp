#include <algorithm>
#include <deque>
#include <map>
#include <numeric>
#include <random>

#include "zfdt/community.hpp"
#include "zfdt/errors.hpp"

namespace zfdt {

void LeidenConfig::validate() const {
    if (!(resolution > 0.0)) throw ConfigError("leiden resolution must be positive");
    if (max_iterations < 1) throw ConfigError("leiden max_iterations must be at least 1");
    if (!(min_gain_epsilon > 0.0)) throw ConfigError("leiden min_gain_epsilon must be positive");
}

double WeightedGraph::degree(std::size_t v) const {
    double k = self_weight[v];
    for (const auto& [u, w] : adjacency[v]) k += w;
    return k;
}

double WeightedGraph::total_weight() const {
    double total = 0.0;
    for (std::size_t v = 0; v < size(); ++v) total += degree(v);
    return total;
}

WeightedGraph WeightedGraph::from_graph(const KnowledgeGraph& graph) {
    WeightedGraph g;
    g.adjacency.resize(graph.size());
    g.self_weight.assign(graph.size(), 0.0);
    for (std::size_t v = 0; v < graph.size(); ++v) {
        for (const auto& [u, w] : graph.neighbors(static_cast<EntityId>(v))) {
            g.adjacency[v].emplace_back(static_cast<std::size_t>(u), w);
        }
    }
    return g;
}

WeightedGraph WeightedGraph::induced(const KnowledgeGraph& graph, const std::vector<EntityId>& nodes) {
    std::map<EntityId, std::size_t> local;
    for (std::size_t i = 0; i < nodes.size(); ++i) local.emplace(nodes[i], i);
    WeightedGraph g;
    g.adjacency.resize(nodes.size());
    g.self_weight.assign(nodes.size(), 0.0);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        for (const auto& [u, w] : graph.neighbors(nodes[i])) {
            const auto it = local.find(u);
            if (it != local.end()) g.adjacency[i].emplace_back(it->second, w);
        }
    }
    return g;
}

WeightedGraph WeightedGraph::from_edges(std::size_t n,
                                        const std::vector<std::tuple<std::size_t, std::size_t, double>>& edges) {
    std::vector<std::map<std::size_t, double>> merged(n);
    WeightedGraph g;
    g.self_weight.assign(n, 0.0);
    for (const auto& [a, b, w] : edges) {
        if (a >= n || b >= n) throw InvalidInput("edge endpoint out of range");
        if (a == b) {
            g.self_weight[a] += 2.0 * w;
            continue;
        }
        merged[a][b] += w;
        merged[b][a] += w;
    }
    g.adjacency.resize(n);
    for (std::size_t v = 0; v < n; ++v) {
        for (const auto& [u, w] : merged[v]) g.adjacency[v].emplace_back(u, w);
    }
    return g;
}

std::vector<std::vector<std::size_t>> Partition::members() const {
    std::vector<std::vector<std::size_t>> out(community_count());
    for (std::size_t v = 0; v < assignment.size(); ++v) out[static_cast<std::size_t>(assignment[v])].push_back(v);
    return out;
}

namespace {

// Renumbers community labels densely in order of first appearance.
std::size_t renumber(std::vector<std::int64_t>& assignment) {
    std::map<std::int64_t, std::int64_t> relabel;
    for (auto& c : assignment) {
        const auto [it, inserted] = relabel.emplace(c, static_cast<std::int64_t>(relabel.size()));
        c = it->second;
    }
    return relabel.size();
}

}  // namespace

Partition make_partition(const WeightedGraph& graph, std::vector<std::int64_t> assignment, double resolution) {
    if (assignment.size() != graph.size()) throw InvalidInput("assignment size mismatch");
    Partition p;
    const std::size_t count = renumber(assignment);
    p.assignment = std::move(assignment);
    p.sigma_in.assign(count, 0.0);
    p.sigma_tot.assign(count, 0.0);
    for (std::size_t v = 0; v < graph.size(); ++v) {
        const auto c = static_cast<std::size_t>(p.assignment[v]);
        p.sigma_in[c] += graph.self_weight[v];
        p.sigma_tot[c] += graph.self_weight[v];
        for (const auto& [u, w] : graph.adjacency[v]) {
            p.sigma_tot[c] += w;
            if (p.assignment[u] == p.assignment[v]) p.sigma_in[c] += w;
        }
    }
    const double two_m = graph.total_weight();
    if (two_m > 0.0) {
        for (std::size_t c = 0; c < count; ++c) {
            const double share = p.sigma_tot[c] / two_m;
            p.modularity += p.sigma_in[c] / two_m - resolution * share * share;
        }
    }
    return p;
}

double modularity(const WeightedGraph& graph, const std::vector<std::int64_t>& assignment, double resolution) {
    return make_partition(graph, assignment, resolution).modularity;
}

double modularity_gain(double sigma_in, double k_v_in, double sigma_tot, double k_v, double two_m, double gamma) {
    return (sigma_in + k_v_in) / two_m - gamma * ((sigma_tot + k_v) * k_v) / (two_m * two_m);
}

namespace {

double weight_to(const WeightedGraph& graph, const std::vector<std::int64_t>& assignment, std::size_t node,
                 std::int64_t community) {
    double w = 0.0;
    for (const auto& [u, wu] : graph.adjacency[node]) {
        if (assignment[u] == community) w += wu;
    }
    return w;
}

}  // namespace

double modularity_gain(const WeightedGraph& graph, const Partition& partition, std::size_t node,
                       std::int64_t target, const LeidenConfig& config) {
    if (node >= graph.size()) throw InvalidInput("node out of range");
    if (target < 0 || static_cast<std::size_t>(target) >= partition.community_count()) {
        throw InvalidInput("target community out of range");
    }
    if (partition.assignment[node] == target) throw PreconditionError("node already belongs to target community");
    const auto t = static_cast<std::size_t>(target);
    return modularity_gain(partition.sigma_in[t], weight_to(graph, partition.assignment, node, target),
                           partition.sigma_tot[t], graph.degree(node), graph.total_weight(), config.resolution);
}

double move_delta(const WeightedGraph& graph, const Partition& partition, std::size_t node, std::int64_t target,
                  double resolution) {
    if (node >= graph.size()) throw InvalidInput("node out of range");
    const std::int64_t own = partition.assignment[node];
    if (own == target) throw PreconditionError("node already belongs to target community");
    const double two_m = graph.total_weight();
    if (two_m == 0.0) return 0.0;
    const double k_v = graph.degree(node);
    auto join = [&](double k_in, double tot) { return 2.0 * k_in / two_m - 2.0 * resolution * tot * k_v / (two_m * two_m); };
    const double leave = join(weight_to(graph, partition.assignment, node, own),
                              partition.sigma_tot[static_cast<std::size_t>(own)] - k_v);
    double enter = 0.0;
    if (target >= 0 && static_cast<std::size_t>(target) < partition.community_count()) {
        enter = join(weight_to(graph, partition.assignment, node, target),
                     partition.sigma_tot[static_cast<std::size_t>(target)]);
    }
    return enter - leave;
}

bool communities_connected(const WeightedGraph& graph, const std::vector<std::int64_t>& assignment) {
    const std::size_t n = graph.size();
    std::map<std::int64_t, std::size_t> sizes;
    for (auto c : assignment) ++sizes[c];
    std::vector<char> seen(n, 0);
    std::map<std::int64_t, bool> visited;
    for (std::size_t s = 0; s < n; ++s) {
        const auto c = assignment[s];
        if (visited[c]) continue;
        visited[c] = true;
        std::size_t reached = 0;
        std::deque<std::size_t> q{s};
        seen[s] = 1;
        while (!q.empty()) {
            const auto v = q.front();
            q.pop_front();
            ++reached;
            for (const auto& [u, w] : graph.adjacency[v]) {
                if (w > 0.0 && !seen[u] && assignment[u] == c) {
                    seen[u] = 1;
                    q.push_back(u);
                }
            }
        }
        if (reached != sizes[c]) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Leiden phases

namespace {

class Mover {
public:
    Mover(const WeightedGraph& g, double gamma, double eps)
        : g_(g), gamma_(gamma), eps_(eps), two_m_(g.total_weight()), degree_(g.size()), w_to_(g.size(), 0.0) {
        for (std::size_t v = 0; v < g.size(); ++v) degree_[v] = g.degree(v);
    }

    double two_m() const { return two_m_; }
    double degree(std::size_t v) const { return degree_[v]; }

    // Fast local moving. `comm` labels must lie in [0, n). Returns true if any node moved.
    bool move_nodes(std::vector<std::int64_t>& comm, std::mt19937_64& rng) {
        const std::size_t n = g_.size();
        if (two_m_ <= 0.0 || n == 0) return false;
        std::vector<double> tot(n, 0.0);
        std::vector<std::size_t> count(n, 0);
        for (std::size_t v = 0; v < n; ++v) {
            tot[static_cast<std::size_t>(comm[v])] += degree_[v];
            ++count[static_cast<std::size_t>(comm[v])];
        }
        std::vector<std::size_t> empties;
        for (std::size_t c = n; c-- > 0;) {
            if (count[c] == 0) empties.push_back(c);
        }
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        std::deque<std::size_t> queue(order.begin(), order.end());
        std::vector<char> queued(n, 1);
        bool moved_any = false;
        std::vector<std::size_t> touched;

        while (!queue.empty()) {
            const std::size_t v = queue.front();
            queue.pop_front();
            queued[v] = 0;
            const auto own = static_cast<std::size_t>(comm[v]);
            const double k_v = degree_[v];

            touched.clear();
            for (const auto& [u, w] : g_.adjacency[v]) {
                const auto c = static_cast<std::size_t>(comm[u]);
                if (w_to_[c] == 0.0) touched.push_back(c);
                w_to_[c] += w;
            }
            tot[own] -= k_v;
            --count[own];

            const double stay = score(w_to_[own], tot[own], k_v);
            std::size_t best = own;
            double best_gain = 0.0;
            for (std::size_t c : touched) {
                if (c == own) continue;
                const double gain = score(w_to_[c], tot[c], k_v) - stay;
                if (gain > best_gain) {
                    best_gain = gain;
                    best = c;
                }
            }
            if (count[own] > 0 && -stay > best_gain) {
                best_gain = -stay;
                best = empties.empty() ? own : empties.back();
            }
            if (best_gain <= eps_) best = own;

            for (std::size_t c : touched) w_to_[c] = 0.0;
            w_to_[own] = 0.0;

            if (best != own) {
                if (!empties.empty() && best == empties.back()) empties.pop_back();
                if (count[own] == 0) empties.push_back(own);
                comm[v] = static_cast<std::int64_t>(best);
                moved_any = true;
                for (const auto& [u, w] : g_.adjacency[v]) {
                    if (!queued[u] && static_cast<std::size_t>(comm[u]) != best) {
                        queued[u] = 1;
                        queue.push_back(u);
                    }
                }
            }
            tot[best] += k_v;
            ++count[best];
        }
        return moved_any;
    }

    // Refinement: merges singletons into connected, well-connected subsets of each community.
    std::vector<std::int64_t> refine(const std::vector<std::int64_t>& comm, std::mt19937_64& rng) {
        const std::size_t n = g_.size();
        std::vector<std::int64_t> ref(n);
        std::iota(ref.begin(), ref.end(), 0);
        if (two_m_ <= 0.0) return ref;
        std::vector<double> comm_tot(n, 0.0);
        for (std::size_t v = 0; v < n; ++v) comm_tot[static_cast<std::size_t>(comm[v])] += degree_[v];
        std::vector<double> ref_tot(degree_);
        std::vector<std::size_t> ref_count(n, 1);
        std::vector<double> external(n, 0.0);  // weight from the refined subset to the rest of its community
        for (std::size_t v = 0; v < n; ++v) {
            for (const auto& [u, w] : g_.adjacency[v]) {
                if (comm[u] == comm[v]) external[v] += w;
            }
        }
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<std::size_t> touched;
        for (std::size_t v : order) {
            if (ref_count[static_cast<std::size_t>(ref[v])] != 1) continue;
            const auto c = static_cast<std::size_t>(comm[v]);
            const double k_v = degree_[v];
            if (external[v] < gamma_ * k_v * (comm_tot[c] - k_v) / two_m_) continue;

            touched.clear();
            for (const auto& [u, w] : g_.adjacency[v]) {
                if (comm[u] != comm[v]) continue;
                const auto t = static_cast<std::size_t>(ref[u]);
                if (w_to_[t] == 0.0) touched.push_back(t);
                w_to_[t] += w;
            }
            std::size_t best = static_cast<std::size_t>(ref[v]);
            double best_gain = 0.0;
            for (std::size_t t : touched) {
                if (t == static_cast<std::size_t>(ref[v])) continue;
                const bool well_connected =
                    external[t] >= gamma_ * ref_tot[t] * (comm_tot[c] - ref_tot[t]) / two_m_;
                if (!well_connected) continue;
                const double gain = score(w_to_[t], ref_tot[t], k_v);
                if (gain > best_gain) {
                    best_gain = gain;
                    best = t;
                }
            }
            const double w_best = best == static_cast<std::size_t>(ref[v]) ? 0.0 : w_to_[best];
            for (std::size_t t : touched) w_to_[t] = 0.0;
            if (best == static_cast<std::size_t>(ref[v])) continue;

            const auto old = static_cast<std::size_t>(ref[v]);
            ref_count[old] = 0;
            ref_tot[old] = 0.0;
            ref[v] = static_cast<std::int64_t>(best);
            ref_tot[best] += k_v;
            ++ref_count[best];
            external[best] = external[best] + external[v] - 2.0 * w_best;
        }
        return ref;
    }

private:
    // Gain of inserting an isolated node with degree k_v and k_in links into a community with total `tot`.
    double score(double k_in, double tot, double k_v) const {
        return 2.0 * k_in / two_m_ - 2.0 * gamma_ * tot * k_v / (two_m_ * two_m_);
    }

    const WeightedGraph& g_;
    double gamma_;
    double eps_;
    double two_m_;
    std::vector<double> degree_;
    std::vector<double> w_to_;
};

WeightedGraph aggregate(const WeightedGraph& g, const std::vector<std::int64_t>& ref, std::size_t count) {
    WeightedGraph a;
    a.self_weight.assign(count, 0.0);
    std::vector<std::map<std::size_t, double>> merged(count);
    for (std::size_t v = 0; v < g.size(); ++v) {
        const auto cv = static_cast<std::size_t>(ref[v]);
        a.self_weight[cv] += g.self_weight[v];
        for (const auto& [u, w] : g.adjacency[v]) {
            const auto cu = static_cast<std::size_t>(ref[u]);
            if (cu == cv) {
                a.self_weight[cv] += w;
            } else {
                merged[cv][cu] += w;
            }
        }
    }
    a.adjacency.resize(count);
    for (std::size_t c = 0; c < count; ++c) {
        for (const auto& [d, w] : merged[c]) a.adjacency[c].emplace_back(d, w);
    }
    return a;
}

// Splits every community into its connected components. Returns true on any split.
bool split_disconnected(const WeightedGraph& g, std::vector<std::int64_t>& comm) {
    const std::size_t n = g.size();
    std::vector<std::int64_t> out(n, -1);
    std::int64_t next = 0;
    std::map<std::int64_t, int> components;
    for (std::size_t s = 0; s < n; ++s) {
        if (out[s] >= 0) continue;
        ++components[comm[s]];
        const std::int64_t label = next++;
        std::deque<std::size_t> q{s};
        out[s] = label;
        while (!q.empty()) {
            const auto v = q.front();
            q.pop_front();
            for (const auto& [u, w] : g.adjacency[v]) {
                if (w > 0.0 && out[u] < 0 && comm[u] == comm[s]) {
                    out[u] = label;
                    q.push_back(u);
                }
            }
        }
    }
    bool split = false;
    for (const auto& [c, k] : components) split |= k > 1;
    comm = std::move(out);
    return split;
}

}  // namespace

namespace {

// One multilevel pass: local moving, refinement and aggregation starting from `start`.
std::vector<std::int64_t> leiden_pass(const WeightedGraph& graph, const LeidenConfig& config,
                                      std::vector<std::int64_t> start, std::mt19937_64& rng) {
    const std::size_t n = graph.size();
    std::vector<std::int64_t> node_map(n);
    std::iota(node_map.begin(), node_map.end(), 0);
    WeightedGraph current = graph;
    std::vector<std::int64_t> comm = std::move(start);

    for (int level = 0; level < config.max_iterations; ++level) {
        Mover mover(current, config.resolution, config.min_gain_epsilon);
        mover.move_nodes(comm, rng);
        std::vector<std::int64_t> dense = comm;
        const std::size_t community_count = renumber(dense);
        if (community_count == current.size()) break;

        std::vector<std::int64_t> ref = mover.refine(comm, rng);
        const std::size_t refined_count = renumber(ref);
        if (refined_count == current.size()) {
            comm = std::move(dense);
            break;
        }

        std::vector<std::int64_t> next_comm(refined_count, 0);
        for (std::size_t v = 0; v < current.size(); ++v) next_comm[static_cast<std::size_t>(ref[v])] = dense[v];
        for (auto& m : node_map) m = ref[static_cast<std::size_t>(m)];
        current = aggregate(current, ref, refined_count);
        comm = std::move(next_comm);
    }

    std::vector<std::int64_t> flat(n);
    for (std::size_t v = 0; v < n; ++v) flat[v] = comm[static_cast<std::size_t>(node_map[v])];
    renumber(flat);

    // Polish on the original graph: local optimality plus connected communities.
    Mover mover(graph, config.resolution, config.min_gain_epsilon);
    constexpr int kMaxPolishRounds = 1000;
    for (int round = 0; round < kMaxPolishRounds; ++round) {
        const bool moved = mover.move_nodes(flat, rng);
        const bool split = split_disconnected(graph, flat);
        if (!moved && !split) break;
    }
    renumber(flat);
    return flat;
}

}  // namespace

Partition leiden(const WeightedGraph& graph, const LeidenConfig& config) {
    config.validate();
    const std::size_t n = graph.size();
    if (n == 0) throw EmptyGraph("leiden needs at least one node");
    std::mt19937_64 rng(config.rng_seed);

    // Repeated passes from the previous partition until one leaves it unchanged.
    std::vector<std::int64_t> flat(n);
    std::iota(flat.begin(), flat.end(), 0);
    for (int pass = 0; pass < config.max_iterations; ++pass) {
        std::vector<std::int64_t> next = leiden_pass(graph, config, flat, rng);
        if (pass > 0 && next == flat) break;
        flat = std::move(next);
    }
    return make_partition(graph, std::move(flat), config.resolution);
}

Partition leiden(const KnowledgeGraph& graph, const LeidenConfig& config) {
    return leiden(WeightedGraph::from_graph(graph), config);
}

}  // namespace zfdt
