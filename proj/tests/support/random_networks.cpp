#include "random_networks.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

namespace hygrid::testkit {

namespace {

struct Dsu {
    std::vector<std::size_t> p;
    explicit Dsu(std::size_t n) : p(n) { std::iota(p.begin(), p.end(), 0); }
    std::size_t find(std::size_t x) { return p[x] == x ? x : p[x] = find(p[x]); }
    void unite(std::size_t a, std::size_t b) { p[find(a)] = find(b); }
};

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
bool coin(std::mt19937_64& rng, double p) { return std::bernoulli_distribution(p)(rng); }
std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

/// Random spanning tree plus extra edges over `members`.
std::vector<std::pair<std::size_t, std::size_t>> random_edges(std::mt19937_64& rng, const std::vector<std::size_t>& members,
                                                              double p_extra) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::set<std::pair<std::size_t, std::size_t>> seen;
    auto add = [&](std::size_t a, std::size_t b) {
        if (a > b) std::swap(a, b);
        if (seen.insert({a, b}).second) out.emplace_back(a, b);
    };
    for (std::size_t k = 1; k < members.size(); ++k) add(members[pick(rng, 0, k - 1)], members[k]);
    for (std::size_t a = 0; a < members.size(); ++a) {
        for (std::size_t b = a + 1; b < members.size(); ++b) {
            if (coin(rng, p_extra)) add(members[a], members[b]);
        }
    }
    return out;
}

std::optional<SourceParams> random_source(std::mt19937_64& rng, const RandomNetworkOptions& opt) {
    if (!coin(rng, opt.p_source)) return std::nullopt;
    return SourceParams{uniform(rng, 0.2, 2.0), coin(rng, opt.p_responsive) ? uniform(rng, 0.5, 5.0) : 0.0};
}

}  // namespace

NetworkSpec random_network(std::mt19937_64& rng, const RandomNetworkOptions& opt) {
    for (;;) {
        const std::size_t n_ac = pick(rng, 1, opt.max_ac);
        const std::size_t n_dc = pick(rng, 0, opt.max_dc);
        const std::size_t budget = pick(rng, std::max<std::size_t>(n_ac + 1, 2), opt.max_nodes);

        // kinds: 0 machine, 1 converter, 2 dc bus
        std::vector<int> kind;
        std::vector<std::size_t> ac_of;
        std::vector<std::size_t> dc_of;  // n_dc = none
        std::vector<std::vector<std::size_t>> ac_members(n_ac);
        std::vector<std::vector<std::size_t>> dc_members(n_dc);
        for (std::size_t k = 0; k < budget; ++k) {
            const bool dc_bus = n_dc > 0 && k >= n_ac && coin(rng, 0.2);
            if (dc_bus) {
                kind.push_back(2);
                ac_of.push_back(n_ac);
                const std::size_t j = pick(rng, 0, n_dc - 1);
                dc_of.push_back(j);
                dc_members[j].push_back(k);
                continue;
            }
            const std::size_t i = k < n_ac ? k : pick(rng, 0, n_ac - 1);
            const bool conv = coin(rng, opt.p_converter);
            kind.push_back(conv ? 1 : 0);
            ac_of.push_back(i);
            ac_members[i].push_back(k);
            std::size_t j = n_dc;
            if (conv && n_dc > 0 && coin(rng, 0.7)) {
                j = pick(rng, 0, n_dc - 1);
                dc_members[j].push_back(k);
            }
            dc_of.push_back(j);
        }

        Dsu dsu(budget);
        NetworkSpec spec;
        spec.name = "random";
        auto id = [](std::size_t k) { return "n" + std::string(k < 10 ? "0" : "") + std::to_string(k); };
        for (std::size_t k = 0; k < budget; ++k) {
            const NodeKind nk = kind[k] == 0 ? NodeKind::AcMachine : (kind[k] == 1 ? NodeKind::Converter : NodeKind::DcBus);
            spec.nodes.push_back(NodeSpec{id(k), nk});
        }
        for (const auto& m : ac_members) {
            for (const auto& [a, b] : random_edges(rng, m, opt.p_extra_edge)) {
                spec.ac_edges.push_back(EdgeSpec{"", id(a), id(b), uniform(rng, opt.w_lo, opt.w_hi)});
                dsu.unite(a, b);
            }
        }
        std::vector<double> k_theta(n_dc);
        for (std::size_t j = 0; j < n_dc; ++j) {
            k_theta[j] = uniform(rng, 0.05, 0.5);
            for (const auto& [a, b] : random_edges(rng, dc_members[j], opt.p_extra_edge)) {
                spec.dc_edges.push_back(EdgeSpec{"", id(a), id(b), uniform(rng, opt.w_lo, opt.w_hi)});
                dsu.unite(a, b);
            }
        }
        bool connected = true;
        for (std::size_t k = 1; k < budget; ++k) connected = connected && dsu.find(k) == dsu.find(0);
        // dc subgrids made only of dc buses are unreachable from any converter
        for (const auto& m : dc_members) {
            if (!m.empty() && std::none_of(m.begin(), m.end(), [&](std::size_t k) { return kind[k] == 1; })) connected = false;
        }
        if (!connected) continue;

        for (std::size_t k = 0; k < budget; ++k) {
            const double loss = coin(rng, opt.p_damped) ? uniform(rng, 0.1, 1.0) : 0.0;
            if (kind[k] == 0) {
                spec.devices.emplace(id(k), MachineParams{uniform(rng, 0.5, 2.0), loss, random_source(rng, opt)});
            } else if (kind[k] == 2) {
                spec.devices.emplace(id(k), DcBusParams{uniform(rng, 0.1, 1.0), loss, random_source(rng, opt)});
            } else {
                double kt = uniform(rng, 0.05, 0.5);
                if (dc_of[k] < n_dc && opt.consistent_k_theta) kt = k_theta[dc_of[k]];
                spec.devices.emplace(id(k), ConverterParams{uniform(rng, 0.1, 1.0), loss, uniform(rng, 0.02, 0.2), kt,
                                                            random_source(rng, opt)});
            }
        }
        return spec;
    }
}

Eigen::MatrixXd adjacency_laplacian(std::size_t n, const std::vector<std::tuple<std::size_t, std::size_t, double>>& edges) {
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (const auto& [a, b, w] : edges) {
        const auto i = static_cast<Eigen::Index>(a);
        const auto j = static_cast<Eigen::Index>(b);
        L(i, j) -= w;
        L(j, i) -= w;
        L(i, i) += w;
        L(j, j) += w;
    }
    return L;
}

Eigen::VectorXd subspace_equilibrium(const SystemModel& model, const Eigen::VectorXd& loads) {
    const Eigen::MatrixXd Q = reachable_subspace_basis(model);
    const Eigen::MatrixXd R = Q.transpose() * model.dynamics() * Q;
    const Eigen::VectorXd rhs = -Q.transpose() * model.input() * loads;
    return Q * R.colPivHouseholderQr().solve(rhs);
}

Eigen::VectorXd random_loads(std::mt19937_64& rng, const SystemModel& model) {
    Eigen::VectorXd p(static_cast<Eigen::Index>(model.load_dim()));
    for (Eigen::Index k = 0; k < p.size(); ++k) p(k) = uniform(rng, -0.5, 0.5);
    return p;
}

Eigen::VectorXd random_state(std::mt19937_64& rng, const SystemModel& model) {
    const Eigen::MatrixXd Q = reachable_subspace_basis(model);
    Eigen::VectorXd y(Q.cols());
    for (Eigen::Index k = 0; k < y.size(); ++k) y(k) = uniform(rng, -1.0, 1.0);
    Eigen::VectorXd x = Q * y;
    const auto& L = model.layout;
    x.segment(L.Pbar.begin(), L.Pbar.count()).setZero();
    return x;
}

NetworkSpec three_machine_network(double m1, double d1, double m2, double m3, double b1, double b2) {
    NetworkSpec s;
    s.name = "three_machines";
    s.nodes = {{"1", NodeKind::AcMachine}, {"2", NodeKind::AcMachine}, {"3", NodeKind::AcMachine}};
    s.ac_edges = {{"e1", "1", "2", b1}, {"e2", "1", "3", b2}};
    s.devices.emplace("1", MachineParams{m1, d1, std::nullopt});
    s.devices.emplace("2", MachineParams{m2, 0.0, std::nullopt});
    s.devices.emplace("3", MachineParams{m3, 0.0, std::nullopt});
    return s;
}

}  // namespace hygrid::testkit
