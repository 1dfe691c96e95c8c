#pragma once

#include <string>
#include <vector>

#include "treegibbs/indexed_graph.hpp"
#include "treegibbs/io.hpp"

namespace tgtest {

inline std::string fixture(const std::string& name) { return std::string(TREEGIBBS_FIXTURES) + "/" + name; }

inline treegibbs::IndexedGraph load_graph(const std::string& name) {
    return *treegibbs::io::parse_config(fixture(name + ".json")).graph;
}

/// Two vertices a, b joined by e: a -> b with i(e) = ie, i(ē) = irev.
inline treegibbs::IndexedGraph single_edge(long ie, long irev, long base_value = 1) {
    using namespace treegibbs;
    OrderSpec o;
    o.base_value = base_value;
    return IndexedGraph({"a", "b"}, {Edge{"e", 1, 0, 1, ie}, Edge{"eb", 0, 1, 0, irev}}, {}, {}, o);
}

/// Cuspidal ray: f: a0 -> b (i = r+1, s), ray period [(r,1),(s,1)].
inline treegibbs::IndexedGraph cusp_ray(long r, long s) {
    using namespace treegibbs;
    TailSpec t;
    t.attach = 0;
    t.period = {{r, 1}, {s, 1}};
    return IndexedGraph({"a0", "b"}, {Edge{"f", 1, 0, 1, r + 1}, Edge{"fb", 0, 1, 0, s}}, {t});
}

/// Fixtures without tails.
inline const std::vector<std::string>& finite_fixtures() {
    static const std::vector<std::string> v{"single_edge", "biregular_2_4", "biregular_4_4", "path_lattice",
                                            "loop_lattice"};
    return v;
}

inline const std::vector<std::string>& tailed_fixtures() {
    static const std::vector<std::string> v{"cusp_ray_2_2", "cusp_ray_2_4", "cusp_ray_4_4", "ray_q5",
                                            "lattice_ray_q3"};
    return v;
}

inline std::vector<std::string> all_fixtures() {
    auto v = finite_fixtures();
    v.insert(v.end(), tailed_fixtures().begin(), tailed_fixtures().end());
    return v;
}

}  // namespace tgtest
