#include "hygrid/io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "hygrid/errors.hpp"

namespace hygrid {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

[[noreturn]] void bad(const std::string& field, const std::string& what) {
    throw Error(ErrorCode::ParseError, field + ": " + what, field);
}

const Json& member(const Json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) bad(where + "." + key, "missing");
    return obj.at(key);
}

std::string get_string(const Json& obj, const char* key, const std::string& where) {
    const Json& v = member(obj, key, where);
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    bad(where + "." + key, "expected a string");
}

double get_number(const Json& obj, const char* key, const std::string& where) {
    const Json& v = member(obj, key, where);
    if (!v.is_number()) bad(where + "." + key, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) bad(where + "." + key, "not finite");
    return d;
}

double get_number_or(const Json& obj, const char* key, const std::string& where, double fallback) {
    return obj.contains(key) ? get_number(obj, key, where) : fallback;
}

void check_keys(const Json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) bad(where, "expected an object");
    for (const auto& [key, value] : obj.items()) {
        bool ok = key == "comment" || key == "notes";
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) bad(where + "." + key, "unknown key");
    }
}

std::optional<SourceParams> parse_source(const Json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
    const std::string w = where + "." + key;
    const Json& s = obj.at(key);
    check_keys(s, w, {"T_g", "k_g"});
    return SourceParams{get_number(s, "T_g", w), get_number_or(s, "k_g", w, 0.0)};
}

DeviceBlock parse_device(const Json& obj, const std::string& where, std::optional<NodeKind> kind) {
    std::string type;
    if (obj.is_object() && obj.contains("type")) {
        type = get_string(obj, "type", where);
    } else if (kind) {
        switch (*kind) {
            case NodeKind::AcMachine: type = "machine"; break;
            case NodeKind::DcBus: type = "dc-bus"; break;
            case NodeKind::Converter: type = "converter"; break;
            case NodeKind::AcBus: bad(where, "passive ac buses take no device block");
        }
    } else {
        bad(where + ".type", "missing (node is unknown)");
    }
    if (type == "machine") {
        check_keys(obj, where, {"type", "M", "D", "turbine"});
        return MachineParams{get_number(obj, "M", where), get_number_or(obj, "D", where, 0.0),
                             parse_source(obj, "turbine", where)};
    }
    if (type == "dc-bus") {
        check_keys(obj, where, {"type", "C", "G", "source"});
        return DcBusParams{get_number(obj, "C", where), get_number_or(obj, "G", where, 0.0),
                           parse_source(obj, "source", where)};
    }
    if (type == "converter") {
        check_keys(obj, where, {"type", "C", "G", "m_p", "k_theta", "source"});
        return ConverterParams{get_number(obj, "C", where), get_number_or(obj, "G", where, 0.0),
                               get_number(obj, "m_p", where), get_number(obj, "k_theta", where),
                               parse_source(obj, "source", where)};
    }
    bad(where + ".type", "unknown device type '" + type + "'");
}

std::vector<EdgeSpec> parse_edges(const Json& doc, const char* key, const char* weight) {
    std::vector<EdgeSpec> out;
    if (!doc.contains(key)) return out;
    const Json& arr = doc.at(key);
    if (!arr.is_array()) bad(key, "expected an array");
    for (std::size_t k = 0; k < arr.size(); ++k) {
        const std::string w = std::string(key) + "[" + std::to_string(k) + "]";
        check_keys(arr[k], w, {"id", "from", "to", weight});
        EdgeSpec e;
        e.id = arr[k].contains("id") ? get_string(arr[k], "id", w) : std::string();
        e.from = get_string(arr[k], "from", w);
        e.to = get_string(arr[k], "to", w);
        e.weight = get_number(arr[k], weight, w);
        out.push_back(std::move(e));
    }
    return out;
}

Json parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path.string(), path.string());
    try {
        return Json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::ParseError, path.string() + ": " + e.what(), path.string());
    }
}

Json source_json(const std::optional<SourceParams>& s) {
    if (!s) return nullptr;
    return Json{{"T_g", s->T_g}, {"k_g", s->k_g}};
}

Json vec(const VectorXd& v) {
    Json a = Json::array();
    for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v(k));
    return a;
}

Json mat(const MatrixXd& m) {
    Json a = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vec(m.row(r).transpose()));
    return a;
}

Json ids(const NetworkGraph& g, const std::vector<std::size_t>& nodes) {
    Json a = Json::array();
    for (auto n : nodes) a.push_back(g.id(n));
    return a;
}

Json keyed(const std::vector<std::string>& names, const VectorXd& values) {
    Json o = Json::object();
    for (std::size_t k = 0; k < names.size(); ++k) o[names[k]] = values(static_cast<Eigen::Index>(k));
    return o;
}

std::string join(const NetworkGraph& g, const std::vector<std::size_t>& nodes) {
    std::string s;
    for (auto n : nodes) s += (s.empty() ? "" : " ") + g.id(n);
    return "{" + s + "}";
}

std::string yes(bool b) { return b ? "pass" : "fail"; }

}  // namespace

NetworkSpec parse_network(const Json& doc) {
    check_keys(doc, "network", {"name", "base", "nodes", "ac_edges", "dc_edges", "devices"});
    NetworkSpec spec;
    if (doc.contains("name")) spec.name = get_string(doc, "name", "network");
    const Json& nodes = member(doc, "nodes", "network");
    if (!nodes.is_array()) bad("nodes", "expected an array");
    std::map<std::string, NodeKind> kinds;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        const std::string w = "nodes[" + std::to_string(k) + "]";
        check_keys(nodes[k], w, {"id", "kind"});
        NodeSpec n;
        n.id = get_string(nodes[k], "id", w);
        const std::string kind = get_string(nodes[k], "kind", w);
        const auto parsed = node_kind_from_string(kind);
        if (!parsed) bad(w + ".kind", "unknown node kind '" + kind + "'");
        n.kind = *parsed;
        kinds.emplace(n.id, n.kind);
        spec.nodes.push_back(std::move(n));
    }
    spec.ac_edges = parse_edges(doc, "ac_edges", "b");
    spec.dc_edges = parse_edges(doc, "dc_edges", "g");
    if (doc.contains("devices")) {
        const Json& dev = doc.at("devices");
        if (!dev.is_object()) bad("devices", "expected an object keyed by node id");
        for (const auto& [id, block] : dev.items()) {
            const auto it = kinds.find(id);
            std::optional<NodeKind> kind;
            if (it != kinds.end()) kind = it->second;
            spec.devices.emplace(id, parse_device(block, "devices." + id, kind));
        }
    }
    return spec;
}

NetworkSpec load_network(const std::filesystem::path& path) { return parse_network(parse_file(path)); }

Json network_to_json(const NetworkSpec& spec) {
    Json doc;
    doc["name"] = spec.name;
    doc["nodes"] = Json::array();
    for (const auto& n : spec.nodes) doc["nodes"].push_back({{"id", n.id}, {"kind", std::string(to_string(n.kind))}});
    auto edges = [](const std::vector<EdgeSpec>& es, const char* w) {
        Json a = Json::array();
        for (const auto& e : es) a.push_back({{"id", e.id}, {"from", e.from}, {"to", e.to}, {w, e.weight}});
        return a;
    };
    doc["ac_edges"] = edges(spec.ac_edges, "b");
    doc["dc_edges"] = edges(spec.dc_edges, "g");
    Json dev = Json::object();
    for (const auto& [id, block] : spec.devices) {
        dev[id] = std::visit([](const auto& p) -> Json {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, MachineParams>) {
                return {{"type", "machine"}, {"M", p.M}, {"D", p.D}, {"turbine", source_json(p.turbine)}};
            } else if constexpr (std::is_same_v<T, DcBusParams>) {
                return {{"type", "dc-bus"}, {"C", p.C}, {"G", p.G}, {"source", source_json(p.source)}};
            } else {
                return {{"type", "converter"}, {"C", p.C},           {"G", p.G},
                        {"m_p", p.m_p},        {"k_theta", p.k_theta}, {"source", source_json(p.source)}};
            }
        }, block);
    }
    doc["devices"] = dev;
    return doc;
}

DisturbanceSchedule parse_disturbance(const Json& doc) {
    check_keys(doc, "disturbance", {"steps"});
    const Json& steps = member(doc, "steps", "disturbance");
    if (!steps.is_array()) bad("steps", "expected an array");
    DisturbanceSchedule s;
    for (std::size_t k = 0; k < steps.size(); ++k) {
        const std::string w = "steps[" + std::to_string(k) + "]";
        check_keys(steps[k], w, {"t_start", "node", "value", "port"});
        LoadStep step;
        step.t_start = get_number_or(steps[k], "t_start", w, 0.0);
        if (step.t_start < 0.0) bad(w + ".t_start", "must be >= 0");
        step.node = get_string(steps[k], "node", w);
        step.value = get_number(steps[k], "value", w);
        const std::string port = steps[k].contains("port") ? get_string(steps[k], "port", w) : "ac";
        if (port == "ac") step.port = Port::Ac;
        else if (port == "dc") step.port = Port::Dc;
        else bad(w + ".port", "expected ac or dc");
        s.steps.push_back(std::move(step));
    }
    return s;
}

DisturbanceSchedule load_disturbance(const std::filesystem::path& path) { return parse_disturbance(parse_file(path)); }

DisturbanceSchedule transfer_loads(const DisturbanceSchedule& schedule, const PassiveElimination& elimination) {
    DisturbanceSchedule out;
    for (const auto& step : schedule.steps) {
        const auto it = elimination.load_map.find(step.node);
        if (it == elimination.load_map.end()) {
            out.steps.push_back(step);
            continue;
        }
        if (step.port != Port::Ac) {
            throw Error(ErrorCode::InvalidArgument, "passive ac bus " + step.node + " has no dc port", step.node);
        }
        for (const auto& [node, share] : it->second) {
            out.steps.push_back(LoadStep{step.t_start, node, share * step.value, Port::Ac});
        }
    }
    return out;
}

Json report_to_json(const SystemModel& model, const StabilityReport& rep) {
    const auto& g = model.graph;
    Json j;
    j["network"] = rep.network;
    j["verdict"] = std::string(to_string(rep.verdict));
    j["exit_code"] = exit_code(rep.verdict);

    Json gains = Json::array();
    for (const auto& c : rep.k_theta_checks) {
        Json k = Json::object();
        for (const auto& [node, kt] : c.gains) k[g.id(node)] = kt;
        gains.push_back({{"dc_subgrid", c.dc_subgrid}, {"nodes", ids(g, model.partition.dc[c.dc_subgrid].nodes())},
                         {"pass", c.pass}, {"k_theta", k}});
    }
    j["k_theta_consistency"] = {{"pass", rep.k_theta_pass}, {"dc_subgrids", gains}};
    j["stabilizing_device"] = {{"pass", rep.stabilizing.pass},
                               {"witness", rep.stabilizing.witness ? Json(g.id(*rep.stabilizing.witness)) : Json(nullptr)}};

    Json subs = Json::array();
    for (const auto& s : rep.subgrids) {
        Json r;
        r["ac_subgrid"] = s.partition.subgrid;
        r["nodes"] = ids(g, s.reduced.nodes);
        r["converter_dominated"] = s.partition.converter_dominated;
        r["anchor"] = ids(g, s.partition.anchor);
        r["dependent"] = ids(g, s.partition.dependent);
        r["free"] = ids(g, s.partition.free);
        Json edges = Json::array();
        for (auto e : s.reduced.edges) edges.push_back(g.ac_edges[e].id);
        r["reduced_edges"] = edges;
        Json order = Json::array();
        for (const auto& [l, c] : s.removal.removals) order.push_back({{"pendant", g.id(l)}, {"removed", g.id(c)}});
        r["node_removal"] = {{"emptied", s.removal.emptied}, {"order", order}, {"remaining", ids(g, s.removal.remaining)}};
        Json cyc = Json::array();
        for (const auto& nc : s.cycles.nodes) {
            cyc.push_back({{"node", g.id(nc.node)}, {"pendant", nc.pendant}, {"cycle", nc.cycle}});
        }
        r["cycle_check"] = {{"pass", s.cycles.pass}, {"nodes", cyc}};
        r["connection_rank"] = {{"applicable", s.rank.applicable},
                                {"pass", s.rank.pass},
                                {"indeterminate", s.rank.indeterminate},
                                {"ratio_converter_rows", s.rank.ratio_converter_rows},
                                {"ratio_extended", s.rank.ratio_extended},
                                {"singular_values_converter_rows", s.rank.sv_converter_rows},
                                {"singular_values_extended", s.rank.sv_extended}};
        r["certified"] = s.certified;
        subs.push_back(std::move(r));
    }
    j["ac_subgrids"] = subs;
    j["lasalle_certificate_valid"] = rep.lasalle_certificate_valid;
    j["eigen"] = eigen_to_json(rep.eigen);
    j["notes"] = rep.notes;
    return j;
}

void print_report(std::ostream& out, const SystemModel& model, const StabilityReport& rep) {
    const auto& g = model.graph;
    out << "network: " << (rep.network.empty() ? "(unnamed)" : rep.network) << "\n";
    out << "verdict: " << to_string(rep.verdict) << " (exit " << exit_code(rep.verdict) << ")\n";
    out << "k_theta consistency: " << yes(rep.k_theta_pass) << "\n";
    for (const auto& c : rep.k_theta_checks) {
        if (c.pass) continue;
        out << "  dc subgrid " << c.dc_subgrid << " gains:";
        for (const auto& [n, k] : c.gains) out << " " << g.id(n) << "=" << k;
        out << "\n";
    }
    out << "stabilizing device: " << yes(rep.stabilizing.pass);
    if (rep.stabilizing.witness) out << " (witness " << g.id(*rep.stabilizing.witness) << ")";
    out << "\n";
    for (const auto& s : rep.subgrids) {
        out << "ac subgrid " << s.partition.subgrid << " " << join(g, s.reduced.nodes)
            << (s.partition.converter_dominated ? " converter-dominated" : " machine-dominated") << "\n";
        out << "  anchor " << join(g, s.partition.anchor) << " dependent " << join(g, s.partition.dependent) << " free "
            << join(g, s.partition.free) << "\n";
        out << "  reduced edges:";
        for (auto e : s.reduced.edges) out << " " << g.ac_edges[e].id;
        out << "\n  node removal: " << (s.removal.emptied ? "emptied" : "stuck");
        for (const auto& [l, c] : s.removal.removals) out << " " << g.id(c) << "<-" << g.id(l);
        if (!s.removal.emptied) out << " remaining " << join(g, s.removal.remaining);
        out << "\n  cycle check: " << yes(s.cycles.pass);
        for (const auto& nc : s.cycles.nodes) {
            out << " " << g.id(nc.node) << ":" << (nc.pendant ? "pendant" : "") << (nc.pendant && nc.cycle ? "+" : "")
                << (nc.cycle ? "cycle" : "") << (!nc.pendant && !nc.cycle ? "none" : "");
        }
        out << "\n  connection rank: ";
        if (!s.rank.applicable) out << "not needed (no machines)";
        else out << yes(s.rank.pass) << (s.rank.indeterminate ? " (near threshold)" : "") << " ratios "
                 << s.rank.ratio_converter_rows << ", " << s.rank.ratio_extended;
        out << "\n  certified: " << (s.certified ? "yes" : "no") << "\n";
    }
    out << "LaSalle certificate: " << (rep.lasalle_certificate_valid ? "valid" : "invalid") << "\n";
    out << "spectral abscissa: " << rep.eigen.max_real << " (" << to_string(rep.eigen.verdict) << ")\n";
    for (const auto& n : rep.notes) out << "note: " << n << "\n";
}

Json eigen_to_json(const EigenResult& eig) {
    Json sp = Json::array();
    for (const auto& z : eig.spectrum) sp.push_back({z.real(), z.imag()});
    return {{"max_real", eig.max_real}, {"class", std::string(to_string(eig.verdict))}, {"spectrum", sp}};
}

void print_eigen(std::ostream& out, const EigenResult& eig) {
    out << "spectral abscissa " << eig.max_real << " (" << to_string(eig.verdict) << ")\n";
    out << std::setw(24) << "real" << std::setw(24) << "imag" << "\n";
    for (const auto& z : eig.spectrum) out << std::setw(24) << z.real() << std::setw(24) << z.imag() << "\n";
}

Json equilibrium_to_json(const SystemModel& model, const Equilibrium& eq, const VectorXd& loads) {
    const auto& g = model.graph;
    const auto& L = model.layout;
    Json j;
    Json ws = Json::array();
    Json ac_res = Json::array();
    for (std::size_t i = 0; i < model.partition.ac.size(); ++i) {
        ws.push_back({{"ac_subgrid", i}, {"nodes", ids(g, model.partition.ac[i].nodes())}, {"value", eq.omega_s[i]}});
        ac_res.push_back(ac_balance_residual(model, eq, loads, i));
    }
    Json dc_res = Json::array();
    for (std::size_t i = 0; i < model.partition.dc.size(); ++i) dc_res.push_back(dc_balance_residual(model, eq, loads, i));
    j["omega_s"] = ws;
    j["eta"] = keyed(L.eta_ids, eq.x.segment(L.eta.begin(), L.eta.count()));
    j["omega"] = keyed(L.omega_ids, eq.x.segment(L.omega.begin(), L.omega.count()));
    j["v"] = keyed(L.v_ids, eq.x.segment(L.v.begin(), L.v.count()));
    j["P"] = keyed(L.P_ids, eq.x.segment(L.P.begin(), L.P.count()));
    j["Pbar"] = keyed(L.Pbar_ids, eq.x.segment(L.Pbar.begin(), L.Pbar.count()));
    std::vector<std::string> th;
    for (auto n : model.theta_nodes) th.push_back(g.id(n));
    j["P_ac"] = keyed(th, eq.P_ac);
    j["P_dc"] = keyed(L.v_ids, eq.P_dc);
    Json conv = Json::object();
    for (auto n : model.converter_nodes) {
        const auto& p = model.devices.converter(n);
        conv[g.id(n)] = {{"delta_ac", delta_ac(p)}, {"gamma_ac", gamma_ac(p)}, {"gamma_dc", gamma_dc(p)}};
    }
    j["converter_aggregates"] = conv;
    j["balance_residuals"] = {{"ac", ac_res}, {"dc", dc_res}};
    j["rcond"] = eq.rcond;
    j["ill_conditioned"] = eq.ill_conditioned;
    return j;
}

void print_equilibrium_csv(std::ostream& out, const SystemModel& model, const Equilibrium& eq) {
    out << std::setprecision(12) << "quantity,id,value\n";
    for (std::size_t i = 0; i < eq.omega_s.size(); ++i) out << "omega_s," << i << "," << eq.omega_s[i] << "\n";
    const auto labels = model.layout.labels();
    for (std::size_t k = 0; k < labels.size(); ++k) {
        const auto colon = labels[k].find(':');
        out << labels[k].substr(0, colon) << "," << labels[k].substr(colon + 1) << "," << eq.x(static_cast<Eigen::Index>(k))
            << "\n";
    }
}

Json model_to_json(const SystemModel& model) {
    const auto& g = model.graph;
    Json j;
    j["state_labels"] = model.layout.labels();
    Json loads = Json::array();
    for (auto n : model.theta_nodes) loads.push_back("ac:" + g.id(n));
    for (auto n : model.v_nodes) loads.push_back("dc:" + g.id(n));
    j["load_labels"] = loads;
    j["theta_nodes"] = ids(g, model.theta_nodes);
    j["v_nodes"] = ids(g, model.v_nodes);
    Json edges = Json::array();
    for (const auto& e : g.ac_edges) edges.push_back(e.id);
    j["ac_edges"] = edges;
    j["T"] = vec(model.T);
    j["A"] = mat(model.A);
    j["E_d"] = mat(model.E_d);
    j["B_ac"] = mat(model.B_ac);
    j["W_ac"] = vec(model.W_ac);
    j["L_dc"] = mat(model.L_dc);
    j["K_theta_tilde"] = vec(model.K_theta_tilde);
    j["k_theta_consistent"] = model.k_theta_consistent;
    return j;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& tr) {
    out << "t";
    for (const auto& l : tr.labels) out << "," << l;
    out << ",V,dV_dt\n";
    out << std::setprecision(12);
    for (std::size_t k = 0; k < tr.size(); ++k) {
        out << tr.t[k];
        for (Eigen::Index i = 0; i < tr.x[k].size(); ++i) out << "," << tr.x[k](i);
        out << "," << tr.V[k] << "," << tr.dV[k] << "\n";
    }
}

Json trajectory_summary(const SystemModel& model, const Trajectory& tr) {
    const auto& L = model.layout;
    double max_w = 0.0;
    double max_v = 0.0;
    for (const auto& x : tr.x) {
        if (L.omega.size) max_w = std::max(max_w, x.segment(L.omega.begin(), L.omega.count()).cwiseAbs().maxCoeff());
        if (L.v.size) max_v = std::max(max_v, x.segment(L.v.begin(), L.v.count()).cwiseAbs().maxCoeff());
    }
    Json terminal = Json::object();
    for (std::size_t k = 0; k < tr.labels.size(); ++k) terminal[tr.labels[k]] = tr.x.back()(static_cast<Eigen::Index>(k));
    return {{"t_final", tr.t.back()},     {"steps", tr.steps},           {"samples", tr.size()},
            {"V_initial", tr.V.front()},  {"V_final", tr.V.back()},      {"max_V_increase", tr.max_V_increase},
            {"max_abs_omega", max_w},     {"max_abs_v", max_v},          {"terminal", terminal}};
}

}  // namespace hygrid
