#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>

#include <json.hpp>
#include <openssl/evp.h>
#include <openssl/opensslv.h>

#include "fractal.hpp"
#include "holder.hpp"
#include "young.hpp"

namespace fraccur {

using json = nlohmann::json;

// Shortest decimal that reads back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open " + path);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline void write_file(const std::string& path, const std::string& bytes) {
    const auto parent = std::filesystem::path(path).parent_path();
    std::error_code ec;
    if (!parent.empty()) std::filesystem::create_directories(parent, ec);
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::io, "cannot write " + path);
    out << bytes;
    if (!out) fail(ErrorKind::io, "write failed for " + path);
}

inline json parse_json(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        fail(ErrorKind::config, what + ": " + e.what());
    }
}

inline json read_json(const std::string& path) { return parse_json(read_file(path), path); }

// Two-space indent plus a trailing newline; key order is sorted, so output is stable.
inline std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

inline std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int n = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &n, EVP_sha256(), nullptr) != 1)
        fail(ErrorKind::internal, "sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < n; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

inline std::string sha256_file(const std::string& path) { return sha256_hex(read_file(path)); }

namespace detail {

template <class T>
T field(const json& j, const char* key, const std::string& what) {
    if (!j.is_object() || !j.contains(key)) fail(ErrorKind::config, what + ": missing \"" + key + "\"");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        fail(ErrorKind::config, what + ": bad \"" + key + "\"");
    }
}

inline Point point_from(const json& j, int d, const std::string& what) {
    if (!j.is_array() || int(j.size()) != d) fail(ErrorKind::config, what + ": point of wrong dimension");
    Point p{};
    for (int i = 0; i < d; ++i) {
        if (!j[std::size_t(i)].is_number()) fail(ErrorKind::config, what + ": coordinate is not a number");
        p[i] = j[std::size_t(i)].get<double>();
    }
    return p;
}

inline json point_to(const Point& p, int d) {
    json a = json::array();
    for (int i = 0; i < d; ++i) a.push_back(p[i]);
    return a;
}

} // namespace detail

// ---- chains ----

inline json to_json(const CubicalChain& t) {
    json terms = json::array();
    for (auto& [f, c] : t.terms()) {
        json base = json::array();
        for (int i = 0; i < t.dim(); ++i) base.push_back(f.base[i]);
        terms.push_back({{"base", base}, {"axes", f.axis_list(t.dim())}, {"coeff", c}});
    }
    return {{"d", t.dim()}, {"m", t.degree()}, {"level", t.level()}, {"terms", terms}};
}

inline json to_json(const SimplicialChain& t) {
    json sx = json::array();
    for (auto& s : t.simplices()) {
        json verts = json::array();
        for (auto& v : s.v) verts.push_back(detail::point_to(v, t.dim()));
        sx.push_back({{"verts", verts}, {"coeff", s.c}});
    }
    return {{"d", t.dim()}, {"m", t.degree()}, {"simplices", sx}};
}

using AnyChain = std::variant<CubicalChain, SimplicialChain>;

inline AnyChain chain_from_json(const json& j, const std::string& what = "chain") {
    const int d = detail::field<int>(j, "d", what), m = detail::field<int>(j, "m", what);
    if (d < 1 || d > kMaxDim || m < 0 || m > d) fail(ErrorKind::config, what + ": bad dimension or degree");
    if (j.contains("terms")) {
        CubicalChain t(d, m, detail::field<int>(j, "level", what));
        for (auto& term : j.at("terms")) {
            Face f;
            const auto base = detail::field<std::vector<std::int64_t>>(term, "base", what);
            const auto axes = detail::field<std::vector<int>>(term, "axes", what);
            if (int(base.size()) != d) fail(ErrorKind::config, what + ": base of wrong dimension");
            for (int i = 0; i < d; ++i) f.base[i] = base[std::size_t(i)];
            for (int a : axes) {
                if (a < 0 || a >= d || f.has_axis(a)) fail(ErrorKind::config, what + ": bad axis list");
                f.axes |= 1u << a;
            }
            if (f.degree() != m) fail(ErrorKind::config, what + ": face degree differs from m");
            t.add(f, detail::field<double>(term, "coeff", what));
        }
        return t;
    }
    if (j.contains("simplices")) {
        SimplicialChain t(d, m);
        for (auto& s : j.at("simplices")) {
            if (!s.contains("verts") || !s.at("verts").is_array()) fail(ErrorKind::config, what + ": simplex without verts");
            std::vector<Point> v;
            for (auto& p : s.at("verts")) v.push_back(detail::point_from(p, d, what));
            if (int(v.size()) != m + 1) fail(ErrorKind::config, what + ": simplex has wrong vertex count");
            t.add(std::move(v), detail::field<double>(s, "coeff", what));
        }
        return t;
    }
    fail(ErrorKind::config, what + ": needs \"terms\" or \"simplices\"");
}

inline AnyChain load_chain(const std::string& path) { return chain_from_json(read_json(path), path); }

// ---- grid functions: JSON header plus a CSV payload, one value per line ----

inline std::string grid_csv(const GridFunction& u) {
    std::string s;
    for (double v : u.values()) s += format_double(v) + "\n";
    return s;
}

inline json grid_header(const GridFunction& u, const std::string& csv_name) {
    const double h = u.cell();
    Point lo{}, hi{};
    for (int i = 0; i < u.dim(); ++i) {
        lo[i] = double(u.lo()[i]) * h;
        hi[i] = double(u.hi()[i]) * h;
    }
    return {{"d", u.dim()},
            {"level", u.level()},
            {"box", {detail::point_to(lo, u.dim()), detail::point_to(hi, u.dim())}},
            {"values", csv_name}};
}

// Writes path (header) and the payload next to it with extension .csv.
inline void save_grid_function(const std::string& path, const GridFunction& u) {
    const auto csv = std::filesystem::path(path).replace_extension(".csv");
    write_file(csv.string(), grid_csv(u));
    write_file(path, dump_json(grid_header(u, csv.filename().string())));
}

inline std::vector<double> parse_csv_numbers(const std::string& text, const std::string& what) {
    std::vector<double> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && (text[i] == ',' || std::isspace(static_cast<unsigned char>(text[i])))) ++i;
        if (i >= text.size()) break;
        double v = 0;
        auto r = std::from_chars(text.data() + i, text.data() + text.size(), v);
        if (r.ec != std::errc()) fail(ErrorKind::config, what + ": bad number near offset " + std::to_string(i));
        out.push_back(v);
        i = std::size_t(r.ptr - text.data());
    }
    return out;
}

inline GridFunction load_grid_function(const std::string& path) {
    const json j = read_json(path);
    const int level = detail::field<int>(j, "level", path);
    const auto box = detail::field<std::vector<std::vector<double>>>(j, "box", path);
    if (box.size() != 2 || box[0].size() != box[1].size() || box[0].empty() || box[0].size() > kMaxDim)
        fail(ErrorKind::config, path + ": box must be [[lo...], [hi...]]");
    const int d = int(box[0].size());
    if (j.contains("d") && j.at("d") != d) fail(ErrorKind::config, path + ": d disagrees with the box");
    Index lo{}, hi{};
    for (int i = 0; i < d; ++i)
        for (int s = 0; s < 2; ++s) {
            const double x = std::ldexp(box[std::size_t(s)][std::size_t(i)], level);
            if (x != std::round(x)) fail(ErrorKind::config, path + ": box corner is not on the level grid");
            (s ? hi : lo)[i] = std::int64_t(x);
        }
    const auto name = detail::field<std::string>(j, "values", path);
    const auto csv = std::filesystem::path(path).parent_path() / name;
    auto values = parse_csv_numbers(read_file(csv.string()), csv.string());
    std::size_t n = 1;
    for (int i = 0; i < d; ++i) n *= std::size_t(std::max<std::int64_t>(0, hi[i] - lo[i]));
    if (values.size() != n) fail(ErrorKind::config, path + ": payload has " + std::to_string(values.size()) + " values, box needs " + std::to_string(n));
    return GridFunction(d, level, lo, hi, std::move(values));
}

// ---- sets: "disk" (the unit disk), "disk:r=0.3,cx=0.5,cy=0.5", "square", "koch:7", "koch:5,side=4",
// "kochcurve:4", "cantor:ratio=0.3,gen=5", "star:r=0.3,amp=0.2,k=5", or a grid-function file ----

inline OccupancySet parse_set(const std::string& spec) {
    if (spec.size() > 5 && spec.substr(spec.size() - 5) == ".json") {
        const auto g = load_grid_function(spec);
        return OccupancySet::from_raster(g, spec);
    }
    const auto colon = spec.find(':');
    const std::string kind = spec.substr(0, colon);
    std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);
    // a leading bare integer is the generation
    int gen = -1;
    if (!rest.empty() && std::isdigit(static_cast<unsigned char>(rest[0]))) {
        const auto comma = rest.find(',');
        const std::string g = rest.substr(0, comma);
        if (g.find('=') == std::string::npos) {
            std::size_t used = 0;
            try {
                gen = std::stoi(g, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != g.size()) fail(ErrorKind::config, "bad generation in set spec " + spec);
            rest = comma == std::string::npos ? "" : rest.substr(comma + 1);
        }
    }
    const auto p = detail::parse_params(rest);
    if (kind == "disk")
        return disk(make_point({detail::num(p, "cx", 0), detail::num(p, "cy", 0)}), detail::num(p, "r", 1));
    if (kind == "square") return square(detail::num(p, "lo", 0), detail::num(p, "hi", 1), int(detail::num(p, "d", 2)));
    if (kind == "koch") {
        auto s = koch_snowflake(gen < 0 ? int(detail::num(p, "gen", 5)) : gen,
                                make_point({detail::num(p, "cx", 0.5), detail::num(p, "cy", 0.5)}), detail::num(p, "side", 0.6));
        return s;
    }
    if (kind == "kochcurve") return koch_curve(gen < 0 ? int(detail::num(p, "gen", 5)) : gen, detail::num(p, "y", 0.3));
    if (kind == "cantor")
        return cantor_product(detail::num(p, "ratio", 0.3), gen < 0 ? int(detail::num(p, "gen", 5)) : gen, int(detail::num(p, "d", 2)));
    if (kind == "star") {
        const int k = int(detail::num(p, "k", 5));
        if (k < 1 || k > 64) fail(ErrorKind::config, "star harmonic out of range");
        std::vector<double> amp(std::size_t(k), 0.0), ph(std::size_t(k), 0.0);
        amp.back() = detail::num(p, "amp", 0.2);
        return star_domain(make_point({detail::num(p, "cx", 0.5), detail::num(p, "cy", 0.5)}), detail::num(p, "r", 0.3), amp, ph);
    }
    fail(ErrorKind::config, "unknown set kind: " + kind);
}

// ---- forms: {"d":2,"m":1,"components":[spec, ...]}, {"d":2,"m":1,"constant":[c, ...]},
// or {"d":2,"differential_product":[spec, ...]} for the top form det(grad g) ----

inline SampledForm form_from_json(const json& j, const std::string& what = "form") {
    const int d = detail::field<int>(j, "d", what);
    if (d < 1 || d > kMaxDim) fail(ErrorKind::config, what + ": bad dimension");
    if (j.contains("differential_product")) {
        std::vector<HolderFunction> g;
        for (auto& s : detail::field<std::vector<std::string>>(j, "differential_product", what)) g.push_back(parse_function(s));
        for (auto& f : g)
            if (f.in_dim() != d) fail(ErrorKind::config, what + ": function " + f.name() + " has the wrong input dimension");
        return differential_product(g);
    }
    const int m = detail::field<int>(j, "m", what);
    if (m < 0 || m > d) fail(ErrorKind::config, what + ": bad degree");
    const std::size_t n = form_masks(d, m).size();
    if (j.contains("constant")) {
        const auto c = detail::field<std::vector<double>>(j, "constant", what);
        if (c.size() != n) fail(ErrorKind::config, what + ": wrong number of coefficients");
        return constant_form(d, m, c);
    }
    const auto specs = detail::field<std::vector<std::string>>(j, "components", what);
    if (specs.size() != n) fail(ErrorKind::config, what + ": wrong number of components");
    std::vector<HolderFunction> comps;
    for (auto& s : specs) {
        comps.push_back(parse_function(s));
        if (comps.back().in_dim() != d || comps.back().out_dim() != 1)
            fail(ErrorKind::config, what + ": component " + s + " is not a scalar function on R^" + std::to_string(d));
    }
    return holder_form(d, m, comps, j.value("name", what));
}

inline SampledForm load_form(const std::string& path) { return form_from_json(read_json(path), path); }

// ---- manifests ----

inline std::string manifest_path(const std::string& output) { return output + ".manifest.json"; }

inline json library_versions() {
    return {{"fraccur", "1.0.0"},
            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
            {"openssl", OPENSSL_VERSION_TEXT},
            {"compiler", __VERSION__}};
}

// Manifest for one output: config, hashed inputs and outputs, measured constants.
inline json make_manifest(const json& config, const json& inputs, const std::string& output, const json& measured) {
    json in = json::object();
    for (auto& [k, v] : inputs.items()) in[k] = v;
    return {{"config", config},
            {"inputs", in},
            {"output", {{"path", std::filesystem::path(output).filename().string()}, {"sha256", sha256_file(output)}}},
            {"measured", measured},
            {"versions", library_versions()}};
}

inline void write_manifest(const std::string& output, const json& config, const json& inputs, const json& measured) {
    write_file(manifest_path(output), dump_json(make_manifest(config, inputs, output, measured)));
}

} // namespace fraccur
