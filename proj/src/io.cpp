#include "treegibbs/io.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "treegibbs/errors.hpp"

namespace treegibbs::io {

namespace {

std::string at(const std::string& where, const std::string& key) {
    return where.empty() ? key : where + "." + key;
}
std::string at(const std::string& where, std::size_t i) { return where + "[" + std::to_string(i) + "]"; }

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError((where.empty() ? "config" : where) + ": expected an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j.items())
        if (!ok.count(k)) throw ConfigError(at(where, k) + ": unknown field");
}

const json& need(const json& j, const std::string& where, const char* key) {
    if (!j.contains(key)) throw ConfigError(at(where, key) + ": missing required field");
    return j.at(key);
}

long as_long(const json& j, const std::string& path) {
    if (!j.is_number_integer()) throw ConfigError(path + ": expected an integer");
    return j.get<long>();
}

std::size_t as_size(const json& j, const std::string& path) {
    const long v = as_long(j, path);
    if (v < 0) throw ConfigError(path + ": must be non-negative");
    return static_cast<std::size_t>(v);
}

double as_double(const json& j, const std::string& path) {
    if (!j.is_number()) throw ConfigError(path + ": expected a number");
    return j.get<double>();
}

std::string as_string(const json& j, const std::string& path) {
    if (!j.is_string()) throw ConfigError(path + ": expected a string");
    return j.get<std::string>();
}

const json& as_array(const json& j, const std::string& path) {
    if (!j.is_array()) throw ConfigError(path + ": expected an array");
    return j;
}

long positive_index(const json& j, const std::string& path) {
    const long v = as_long(j, path);
    if (v < 1) throw ConfigError(path + ": index must be a positive integer, got " + std::to_string(v));
    return v;
}

std::vector<IndexPair> index_pairs(const json& j, const std::string& path) {
    std::vector<IndexPair> out;
    const auto& arr = as_array(j, path);
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const auto p = at(path, i);
        if (!arr[i].is_array() || arr[i].size() != 2) throw ConfigError(p + ": expected [ie, irev]");
        out.push_back({positive_index(arr[i][0], at(p, 0)), positive_index(arr[i][1], at(p, 1))});
    }
    return out;
}

std::vector<std::pair<double, double>> value_pairs(const json& j, const std::string& path) {
    std::vector<std::pair<double, double>> out;
    const auto& arr = as_array(j, path);
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const auto p = at(path, i);
        if (!arr[i].is_array() || arr[i].size() != 2) throw ConfigError(p + ": expected [F(e_n), F(ebar_n)]");
        out.emplace_back(as_double(arr[i][0], at(p, 0)), as_double(arr[i][1], at(p, 1)));
    }
    return out;
}

Rational as_rational(const json& j, const std::string& path) {
    if (j.is_number_integer()) return Rational(j.get<long long>());
    if (j.is_string()) {
        try {
            return Rational(j.get<std::string>());
        } catch (const std::exception&) {
            throw ConfigError(path + ": not a rational number");
        }
    }
    throw ConfigError(path + ": expected an integer or a \"p/q\" string");
}

json rational_json(const Rational& r) {
    if (denominator(r) == 1) {
        const auto n = numerator(r);
        if (boost::multiprecision::abs(n) < (boost::multiprecision::cpp_int(1) << 62)) return json(n.convert_to<long long>());
    }
    return json(r.str());
}

std::size_t vertex_ref(const json& j, const std::vector<std::string>& names, const std::string& path) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        for (std::size_t v = 0; v < names.size(); ++v)
            if (names[v] == s) return v;
        throw ConfigError(path + ": unknown vertex '" + s + "'");
    }
    const auto v = as_size(j, path);
    if (v >= names.size()) throw ConfigError(path + ": vertex index out of range");
    return v;
}

std::size_t edge_ref(const json& j, const std::vector<std::string>& ids, const std::string& path) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        for (std::size_t e = 0; e < ids.size(); ++e)
            if (ids[e] == s) return e;
        throw ConfigError(path + ": unknown edge '" + s + "'");
    }
    const auto e = as_size(j, path);
    if (e >= ids.size()) throw ConfigError(path + ": edge index out of range");
    return e;
}

json pairs_json(const std::vector<IndexPair>& v) {
    json a = json::array();
    for (const auto& p : v) a.push_back({p.ie, p.irev});
    return a;
}

json pairs_json(const std::vector<std::pair<double, double>>& v) {
    json a = json::array();
    for (const auto& p : v) a.push_back({p.first, p.second});
    return a;
}

json shadow_json(const ShadowVector& u, const IndexedGraph& g) {
    json core = json::object();
    for (std::size_t e = 0; e < g.num_edges(); ++e) core[g.edge(e).id] = u.core.at(e);
    json tails = json::array();
    for (const auto& t : u.tails) {
        json head = json::array();
        for (const auto& x : t.head) head.push_back({x[0], x[1]});
        tails.push_back({{"prefix", t.prefix}, {"period", t.period}, {"lambda", t.lambda}, {"head", head}});
    }
    return {{"core", core}, {"tails", tails}, {"residual", u.residual}};
}

std::filesystem::path resolve_path(const std::string& base_dir, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : std::filesystem::path(base_dir) / path;
}

}  // namespace

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
    }
}

IndexedGraph graph_from_json(const json& j, const std::string& where) {
    only_keys(j, where, {"vertices", "edges", "tails", "funnels", "orders"});
    std::vector<std::string> vertices;
    {
        const auto path = at(where, "vertices");
        const auto& arr = as_array(need(j, where, "vertices"), path);
        for (std::size_t i = 0; i < arr.size(); ++i) vertices.push_back(as_string(arr[i], at(path, i)));
    }
    const auto epath = at(where, "edges");
    const auto& earr = as_array(need(j, where, "edges"), epath);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < earr.size(); ++i) {
        const auto p = at(epath, i);
        only_keys(earr[i], p, {"id", "rev", "from", "to", "index"});
        ids.push_back(as_string(need(earr[i], p, "id"), at(p, "id")));
    }
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < earr.size(); ++i) {
        const auto p = at(epath, i);
        const auto& ej = earr[i];
        Edge e;
        e.id = ids[i];
        e.rev = edge_ref(need(ej, p, "rev"), ids, at(p, "rev"));
        e.from = vertex_ref(need(ej, p, "from"), vertices, at(p, "from"));
        e.to = vertex_ref(need(ej, p, "to"), vertices, at(p, "to"));
        e.index = positive_index(need(ej, p, "index"), at(p, "index"));
        edges.push_back(e);
    }
    std::vector<TailSpec> tails;
    if (j.contains("tails")) {
        const auto tpath = at(where, "tails");
        const auto& tarr = as_array(j.at("tails"), tpath);
        for (std::size_t i = 0; i < tarr.size(); ++i) {
            const auto p = at(tpath, i);
            only_keys(tarr[i], p, {"attach", "prefix", "period"});
            TailSpec t;
            t.attach = vertex_ref(need(tarr[i], p, "attach"), vertices, at(p, "attach"));
            if (tarr[i].contains("prefix")) t.prefix = index_pairs(tarr[i].at("prefix"), at(p, "prefix"));
            t.period = index_pairs(need(tarr[i], p, "period"), at(p, "period"));
            if (t.period.empty()) throw ConfigError(at(p, "period") + ": must be non-empty");
            tails.push_back(std::move(t));
        }
    }
    std::vector<FunnelSpec> funnels;
    if (j.contains("funnels")) {
        const auto fpath = at(where, "funnels");
        const auto& farr = as_array(j.at("funnels"), fpath);
        for (std::size_t i = 0; i < farr.size(); ++i) {
            const auto p = at(fpath, i);
            only_keys(farr[i], p, {"entry_edge", "branching"});
            FunnelSpec f;
            f.entry_edge = edge_ref(need(farr[i], p, "entry_edge"), ids, at(p, "entry_edge"));
            const auto bpath = at(p, "branching");
            const auto& barr = as_array(need(farr[i], p, "branching"), bpath);
            for (std::size_t k = 0; k < barr.size(); ++k) f.branching.push_back(positive_index(barr[k], at(bpath, k)));
            if (f.branching.empty()) throw ConfigError(bpath + ": must be non-empty");
            funnels.push_back(std::move(f));
        }
    }
    OrderSpec orders;
    if (j.contains("orders")) {
        const auto opath = at(where, "orders");
        only_keys(j.at("orders"), opath, {"base_vertex", "base_value"});
        const auto& oj = j.at("orders");
        if (oj.contains("base_vertex"))
            orders.base_vertex = vertex_ref(oj.at("base_vertex"), vertices, at(opath, "base_vertex"));
        if (oj.contains("base_value")) {
            orders.base_value = as_rational(oj.at("base_value"), at(opath, "base_value"));
            if (orders.base_value <= 0) throw ConfigError(at(opath, "base_value") + ": must be positive");
        }
    }
    if (vertices.empty()) throw ConfigError(at(where, "vertices") + ": must be non-empty");
    IndexedGraph g(std::move(vertices), std::move(edges), std::move(tails), std::move(funnels), std::move(orders));
    const auto rep = validate_graph(g);
    if (!rep.ok()) {
        std::string msg = (where.empty() ? std::string("graph") : where) + ": ";
        for (std::size_t i = 0; i < rep.violations.size(); ++i) msg += (i ? "; " : "") + rep.violations[i];
        throw ConfigError(msg);
    }
    return g;
}

json graph_to_json(const IndexedGraph& g) {
    json j;
    j["vertices"] = g.vertex_names();
    json edges = json::array();
    for (const auto& e : g.edges())
        edges.push_back({{"id", e.id},
                         {"rev", g.edge(e.rev).id},
                         {"from", g.vertex_name(e.from)},
                         {"to", g.vertex_name(e.to)},
                         {"index", e.index}});
    j["edges"] = edges;
    if (g.has_tails()) {
        json tails = json::array();
        for (const auto& t : g.tails())
            tails.push_back({{"attach", g.vertex_name(t.attach)},
                             {"prefix", pairs_json(t.prefix)},
                             {"period", pairs_json(t.period)}});
        j["tails"] = tails;
    }
    if (!g.funnels().empty()) {
        json funnels = json::array();
        for (const auto& f : g.funnels())
            funnels.push_back({{"entry_edge", g.edge(f.entry_edge).id}, {"branching", f.branching}});
        j["funnels"] = funnels;
    }
    j["orders"] = {{"base_vertex", g.vertex_name(g.orders().base_vertex)},
                   {"base_value", rational_json(g.orders().base_value)}};
    return j;
}

Potential potential_from_json(const json& j, const IndexedGraph& g, const std::string& where) {
    only_keys(j, where, {"edges", "tail_values"});
    Potential f;
    f.edge_values.assign(g.num_edges(), 0.0);
    if (j.contains("edges")) {
        const auto path = at(where, "edges");
        if (!j.at("edges").is_object()) throw ConfigError(path + ": expected an object keyed by edge id");
        for (const auto& [id, v] : j.at("edges").items()) {
            auto e = g.find_edge(id);
            if (!e) throw ConfigError(at(path, id) + ": unknown edge");
            f.edge_values[*e] = as_double(v, at(path, id));
        }
    }
    f.tails.assign(g.tails().size(), TailPotential{});
    if (j.contains("tail_values")) {
        const auto path = at(where, "tail_values");
        const auto& arr = as_array(j.at("tail_values"), path);
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const auto p = at(path, i);
            only_keys(arr[i], p, {"tail_index", "prefix", "period"});
            const auto t = as_size(need(arr[i], p, "tail_index"), at(p, "tail_index"));
            if (t >= g.tails().size()) throw ConfigError(at(p, "tail_index") + ": no such tail");
            TailPotential tp;
            if (arr[i].contains("prefix")) tp.prefix = value_pairs(arr[i].at("prefix"), at(p, "prefix"));
            if (arr[i].contains("period")) tp.period = value_pairs(arr[i].at("period"), at(p, "period"));
            f.tails[t] = std::move(tp);
        }
    }
    return f;
}

json potential_to_json(const Potential& f, const IndexedGraph& g) {
    json edges = json::object();
    for (std::size_t e = 0; e < g.num_edges(); ++e) edges[g.edge(e).id] = f.core(e);
    json tails = json::array();
    for (std::size_t t = 0; t < f.tails.size(); ++t) {
        if (f.tails[t].prefix.empty() && f.tails[t].period.empty()) continue;
        tails.push_back({{"tail_index", t},
                         {"prefix", pairs_json(f.tails[t].prefix)},
                         {"period", pairs_json(f.tails[t].period)}});
    }
    return {{"edges", edges}, {"tail_values", tails}};
}

json gibbs_to_json(const GibbsData& gd, const IndexedGraph& g) {
    return {{"delta", gd.delta},
            {"delta_minus", gd.delta_minus},
            {"delta_zero", gd.delta_zero},
            {"base_vertex", g.vertex_name(gd.base_vertex)},
            {"normalization", gd.normalization},
            {"solver",
             {{"method", gd.exponent.method},
              {"iterations", gd.exponent.iterations},
              {"tail_critical", std::isfinite(gd.exponent.tail_critical) ? json(gd.exponent.tail_critical) : json()}}},
            {"u_plus", shadow_json(gd.u_plus, g)},
            {"u_minus", shadow_json(gd.u_minus, g)}};
}

json certificate_to_json(const MarkovChain& mc, const DriftCertificate& cert) {
    auto covered = [&](std::size_t s) {
        for (const auto& gt : cert.tails)
            if (!mc.is_core(s) && mc.tail_of[s] == static_cast<int>(gt.tail) && mc.depth_of[s] >= gt.start)
                return true;
        return false;
    };
    json b = json::array(), core = json::object();
    for (std::size_t s = 0; s < mc.size(); ++s) {
        if (cert.b[s]) b.push_back(mc.labels[s]);
        if (!covered(s)) core[mc.labels[s]] = cert.t[s];
    }
    json tails = json::array();
    for (const auto& gt : cert.tails)
        tails.push_back({{"form", "geometric"},
                         {"params",
                          {{"tail", gt.tail},
                           {"start", gt.start},
                           {"period", gt.period},
                           {"mu", gt.mu},
                           {"block", gt.block},
                           {"rho", gt.rho}}}});
    return {{"rho", cert.rho},
            {"provenance", to_string(cert.provenance)},
            {"B", b},
            {"t", {{"core", core}, {"tails", tails}}}};
}

DriftCertificate certificate_from_json(const json& j, const MarkovChain& mc, const std::string& where) {
    only_keys(j, where, {"rho", "B", "t", "provenance"});
    DriftCertificate cert;
    cert.provenance = Provenance::User;
    if (j.contains("provenance")) {
        const auto pv = as_string(j.at("provenance"), at(where, "provenance"));
        if (pv == "analytic-tail") cert.provenance = Provenance::AnalyticTail;
        else if (pv == "search") cert.provenance = Provenance::Search;
        else if (pv != "user")
            throw ConfigError(at(where, "provenance") + ": expected user, analytic-tail or search");
    }
    cert.rho = as_double(need(j, where, "rho"), at(where, "rho"));
    if (!(cert.rho > 0)) throw ConfigError(at(where, "rho") + ": must be positive");
    cert.b.assign(mc.size(), false);
    const auto bpath = at(where, "B");
    const auto& barr = as_array(need(j, where, "B"), bpath);
    for (std::size_t i = 0; i < barr.size(); ++i) {
        auto s = mc.find(as_string(barr[i], at(bpath, i)));
        if (!s) throw ConfigError(at(bpath, i) + ": unknown chain state '" + barr[i].get<std::string>() + "'");
        cert.b[*s] = true;
    }
    cert.t.assign(mc.size(), std::numeric_limits<double>::quiet_NaN());
    const auto tpath = at(where, "t");
    const auto& tj = need(j, where, "t");
    only_keys(tj, tpath, {"core", "tails"});
    if (tj.contains("tails")) {
        const auto path = at(tpath, "tails");
        const auto& arr = as_array(tj.at("tails"), path);
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const auto p = at(path, i);
            only_keys(arr[i], p, {"form", "params"});
            const auto form = as_string(need(arr[i], p, "form"), at(p, "form"));
            if (form != "geometric") throw ConfigError(at(p, "form") + ": unsupported tail form '" + form + "'");
            const auto pp = at(p, "params");
            const auto& prm = need(arr[i], p, "params");
            only_keys(prm, pp, {"tail", "start", "period", "mu", "block", "rho"});
            const auto t = as_size(need(prm, pp, "tail"), at(pp, "tail"));
            GeometricTail gt;
            try {
                gt = tail_blocks(mc, t);
            } catch (const InvalidArgument& e) {
                throw ConfigError(at(pp, "tail") + ": " + e.what());
            }
            const auto start = as_size(need(prm, pp, "start"), at(pp, "start"));
            const auto period = as_size(need(prm, pp, "period"), at(pp, "period"));
            if (start != gt.start || period != gt.period)
                throw ConfigError(pp + ": start/period must match the chain's periodic part (start " +
                                  std::to_string(gt.start) + ", period " + std::to_string(gt.period) + ")");
            gt.mu = as_double(need(prm, pp, "mu"), at(pp, "mu"));
            if (!(gt.mu > 0)) throw ConfigError(at(pp, "mu") + ": must be positive");
            const auto blpath = at(pp, "block");
            const auto& bl = as_array(need(prm, pp, "block"), blpath);
            if (bl.size() != 2 * gt.period) throw ConfigError(blpath + ": expected 2*period weights");
            for (std::size_t k = 0; k < bl.size(); ++k) gt.block.push_back(as_double(bl[k], at(blpath, k)));
            gt.rho = prm.contains("rho") ? as_double(prm.at("rho"), at(pp, "rho")) : cert.rho;
            for (std::size_t s = 0; s < mc.size(); ++s)
                if (!mc.is_core(s) && mc.tail_of[s] == static_cast<int>(t) && mc.depth_of[s] >= gt.start)
                    cert.t[s] = gt.weight(mc.depth_of[s], mc.outward[s]);
            cert.tails.push_back(std::move(gt));
        }
    }
    if (tj.contains("core")) {
        const auto path = at(tpath, "core");
        if (!tj.at("core").is_object()) throw ConfigError(path + ": expected an object keyed by state id");
        for (const auto& [label, v] : tj.at("core").items()) {
            auto s = mc.find(label);
            if (!s) throw ConfigError(at(path, label) + ": unknown chain state");
            cert.t[*s] = as_double(v, at(path, label));
            if (!(cert.t[*s] > 0)) throw ConfigError(at(path, label) + ": weight must be positive");
        }
    }
    return cert;
}

CounterexampleSpec ProbeConfig::spec() const {
    CounterexampleSpec s;
    if (gamma_form == "harmonic") s.gamma = [](long n) { return 1.0 - 1.0 / (1.0 + static_cast<double>(std::labs(n))); };
    else {
        const double c = gamma_value;
        s.gamma = [c](long) { return c; };
    }
    if (beta_form == "uniform") s.beta = [](long) { return 1.0; };
    else {
        const double r = beta_ratio;
        s.beta = [r](long n) { return std::pow(r, static_cast<double>(std::labs(n))); };
    }
    return s;
}

ProbeConfig probe_from_json(const json& j, const std::string& where) {
    only_keys(j, where, {"gamma", "beta", "truncations"});
    ProbeConfig p;
    if (j.contains("gamma")) {
        const auto path = at(where, "gamma");
        only_keys(j.at("gamma"), path, {"form", "value"});
        const auto& g = j.at("gamma");
        p.gamma_form = as_string(need(g, path, "form"), at(path, "form"));
        if (p.gamma_form != "harmonic" && p.gamma_form != "constant")
            throw ConfigError(at(path, "form") + ": expected \"harmonic\" or \"constant\"");
        if (g.contains("value")) p.gamma_value = as_double(g.at("value"), at(path, "value"));
        if (p.gamma_form == "constant" && !(p.gamma_value >= 0 && p.gamma_value < 1))
            throw ConfigError(at(path, "value") + ": must lie in [0, 1)");
    }
    if (j.contains("beta")) {
        const auto path = at(where, "beta");
        only_keys(j.at("beta"), path, {"form", "ratio"});
        const auto& b = j.at("beta");
        p.beta_form = as_string(need(b, path, "form"), at(path, "form"));
        if (p.beta_form != "geometric" && p.beta_form != "uniform")
            throw ConfigError(at(path, "form") + ": expected \"geometric\" or \"uniform\"");
        if (b.contains("ratio")) p.beta_ratio = as_double(b.at("ratio"), at(path, "ratio"));
        if (!(p.beta_ratio > 0 && p.beta_ratio < 1)) throw ConfigError(at(path, "ratio") + ": must lie in (0, 1)");
    }
    if (j.contains("truncations")) {
        const auto path = at(where, "truncations");
        const auto& arr = as_array(j.at("truncations"), path);
        p.truncations.clear();
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const long n = as_long(arr[i], at(path, i));
            if (n < 1 || n > 5000) throw ConfigError(at(path, i) + ": truncation must lie in [1, 5000]");
            p.truncations.push_back(n);
        }
    }
    return p;
}

json probe_to_json(const ProbeConfig& p) {
    json g = {{"form", p.gamma_form}};
    if (p.gamma_form == "constant") g["value"] = p.gamma_value;
    json b = {{"form", p.beta_form}};
    if (p.beta_form == "geometric") b["ratio"] = p.beta_ratio;
    return {{"gamma", g}, {"beta", b}, {"truncations", p.truncations}};
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

void rehash(RunConfig& c) {
    json r;
    if (c.graph) {
        r["graph"] = graph_to_json(*c.graph);
        r["potential"] = potential_to_json(c.potential, *c.graph);
    }
    r["tol"] = c.tol;
    r["n_max"] = c.n_max;
    r["radius"] = c.radius;
    r["depth"] = c.depth;
    json mix = json::object();
    if (c.mix_i) mix["i"] = *c.mix_i;
    if (c.mix_j) mix["j"] = *c.mix_j;
    if (!c.word_a.empty()) mix["a"] = c.word_a;
    if (!c.word_b.empty()) mix["b"] = c.word_b;
    r["mix"] = mix;
    json wsg = {{"lemma_n", c.lemma_n}};
    if (c.wsg_b) wsg["B"] = *c.wsg_b;
    if (c.certificate) wsg["certificate"] = *c.certificate;
    r["wsg"] = wsg;
    r["count"] = {{"n_lo", c.count_lo}, {"n_hi", c.count_hi}};
    if (c.probe) r["probe"] = probe_to_json(*c.probe);
    c.resolved = r;
    c.hash = fnv1a_hex(r.dump());
}

RunConfig parse_config_json(const json& j, const std::string& base_dir) {
    if (!j.is_object()) throw ConfigError("config: expected an object");
    if (j.contains("vertices")) {
        // bare graph file
        RunConfig c;
        c.graph = graph_from_json(j, "");
        c.potential = potential_from_json(json::object(), *c.graph);
        rehash(c);
        return c;
    }
    only_keys(j, "", {"graph", "potential", "tol", "n_max", "radius", "depth", "out", "mix", "wsg", "count", "probe"});
    RunConfig c;
    auto load_ref = [&](const json& v, const std::string& key) -> json {
        if (v.is_string()) return load_json(resolve_path(base_dir, v.get<std::string>()).string());
        if (!v.is_object()) throw ConfigError(key + ": expected an object or a file path");
        return v;
    };
    if (j.contains("graph")) c.graph = graph_from_json(load_ref(j.at("graph"), "graph"), "graph");
    if (j.contains("potential")) {
        if (!c.graph) throw ConfigError("potential: given without a graph");
        c.potential = potential_from_json(load_ref(j.at("potential"), "potential"), *c.graph, "potential");
        c.potential_given = true;
    } else if (c.graph) {
        c.potential = potential_from_json(json::object(), *c.graph);
    }
    if (j.contains("tol")) {
        c.tol = as_double(j.at("tol"), "tol");
        if (!(c.tol > 0)) throw ConfigError("tol: must be positive");
    }
    if (j.contains("n_max")) {
        c.n_max = as_size(j.at("n_max"), "n_max");
        if (c.n_max < 1 || c.n_max > kMaxHorizon) throw ConfigError("n_max: must lie in [1, 10000]");
    }
    if (j.contains("radius")) {
        c.radius = as_size(j.at("radius"), "radius");
        if (c.radius > kMaxRadius) throw ConfigError("radius: exceeds the resource guard 12");
    }
    if (j.contains("depth")) {
        c.depth = as_size(j.at("depth"), "depth");
        if (c.depth > 20000) throw ConfigError("depth: exceeds the resource guard 20000");
    }
    if (j.contains("out")) c.out_dir = resolve_path(base_dir, as_string(j.at("out"), "out")).string();
    if (j.contains("mix")) {
        const auto& m = j.at("mix");
        only_keys(m, "mix", {"i", "j", "a", "b"});
        if (m.contains("i")) c.mix_i = as_string(m.at("i"), "mix.i");
        if (m.contains("j")) c.mix_j = as_string(m.at("j"), "mix.j");
        for (const char* k : {"a", "b"}) {
            if (!m.contains(k)) continue;
            const auto path = std::string("mix.") + k;
            const auto& arr = as_array(m.at(k), path);
            auto& dst = (k[0] == 'a') ? c.word_a : c.word_b;
            for (std::size_t i = 0; i < arr.size(); ++i) dst.push_back(as_string(arr[i], at(path, i)));
        }
    }
    if (j.contains("wsg")) {
        const auto& w = j.at("wsg");
        only_keys(w, "wsg", {"B", "certificate", "lemma_n"});
        if (w.contains("B")) {
            const auto& arr = as_array(w.at("B"), "wsg.B");
            std::vector<std::string> b;
            for (std::size_t i = 0; i < arr.size(); ++i) b.push_back(as_string(arr[i], at("wsg.B", i)));
            c.wsg_b = b;
        }
        if (w.contains("certificate")) c.certificate = load_ref(w.at("certificate"), "wsg.certificate");
        if (w.contains("lemma_n")) {
            c.lemma_n = as_size(w.at("lemma_n"), "wsg.lemma_n");
            if (c.lemma_n > kMaxHorizon) throw ConfigError("wsg.lemma_n: exceeds the resource guard");
        }
    }
    if (j.contains("count")) {
        const auto& k = j.at("count");
        only_keys(k, "count", {"n_lo", "n_hi"});
        if (k.contains("n_lo")) c.count_lo = as_size(k.at("n_lo"), "count.n_lo");
        if (k.contains("n_hi")) c.count_hi = as_size(k.at("n_hi"), "count.n_hi");
        if (c.count_lo > c.count_hi || c.count_hi > 5000) throw ConfigError("count: need n_lo <= n_hi <= 5000");
    }
    if (j.contains("probe")) c.probe = probe_from_json(j.at("probe"), "probe");
    if (!c.graph && !c.probe) throw ConfigError("graph: missing required field");
    rehash(c);
    return c;
}

RunConfig parse_config(const std::string& path) {
    const auto j = load_json(path);
    auto dir = std::filesystem::path(path).parent_path().string();
    return parse_config_json(j, dir.empty() ? "." : dir);
}

}  // namespace treegibbs::io
