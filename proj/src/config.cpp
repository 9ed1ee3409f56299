#include "oscillattr/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "oscillattr/errors.hpp"
#include "oscillattr/io.hpp"

namespace oscillattr {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& what) {
    throw ValidationError(field + ": " + what);
}

// A JSON object with a dotted path, used to reject unknown keys and to name
// fields in diagnostics.
class Section {
public:
    Section(const json& node, std::string path, std::set<std::string> allowed) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) fail(path_, "must be an object");
        for (const auto& item : node_.items())
            if (!allowed.count(item.key())) fail(field(item.key()), "unknown key");
    }

    bool has(const std::string& key) const { return node_.contains(key) && !node_.at(key).is_null(); }
    const json& at(const std::string& key) const { return node_.at(key); }
    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    double number(const std::string& key) const {
        const json& v = node_.at(key);
        if (!v.is_number()) fail(field(key), "must be a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) fail(field(key), "must be finite");
        return x;
    }

    std::int64_t integer(const std::string& key) const {
        const json& v = node_.at(key);
        if (!v.is_number_integer()) fail(field(key), "must be an integer");
        return v.get<std::int64_t>();
    }

    std::uint64_t unsigned_integer(const std::string& key) const {
        const json& v = node_.at(key);
        if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
            fail(field(key), "must be a nonnegative integer");
        return v.get<std::uint64_t>();
    }

    std::string text(const std::string& key) const {
        const json& v = node_.at(key);
        if (!v.is_string()) fail(field(key), "must be a string");
        return v.get<std::string>();
    }

private:
    const json& node_;
    std::string path_;
};

Eigen::VectorXd broadcast(const Section& s, const std::string& key, std::size_t n, double fallback) {
    if (!s.has(key)) return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), fallback);
    const json& v = s.at(key);
    if (v.is_number()) return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), s.number(key));
    if (!v.is_array()) fail(s.field(key), "must be a number or an array of numbers");
    if (v.size() != n)
        fail(s.field(key), "has " + std::to_string(v.size()) + " entries, expected " + std::to_string(n));
    Eigen::VectorXd out(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        if (!v[i].is_number()) fail(s.field(key) + "[" + std::to_string(i) + "]", "must be a number");
        out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
        if (!std::isfinite(out(static_cast<Eigen::Index>(i))))
            fail(s.field(key) + "[" + std::to_string(i) + "]", "must be finite");
    }
    return out;
}

NonlinearityModel parse_nonlinearity(const Section& params) {
    if (!params.has("g")) return NonlinearityModel::sine();
    const Section g(params.at("g"), params.field("g"), {"builtin", "table"});
    if (g.has("builtin") == g.has("table")) fail(g.field("builtin"), "give exactly one of builtin or table");
    if (g.has("builtin")) {
        const std::string name = g.text("builtin");
        if (name != "sin") fail(g.field("builtin"), "unknown builtin '" + name + "' (only sin)");
        return NonlinearityModel::sine();
    }
    const Section table(g.at("table"), g.field("table"), {"kappa", "values"});
    if (!table.has("kappa") || !table.has("values")) fail(table.field("values"), "table needs kappa and values");
    const json& values = table.at("values");
    if (!values.is_array()) fail(table.field("values"), "must be an array of numbers");
    std::vector<double> samples;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!values[i].is_number()) fail(table.field("values") + "[" + std::to_string(i) + "]", "must be a number");
        samples.push_back(values[i].get<double>());
    }
    try {
        NonlinearityModel model = NonlinearityModel::table(table.number("kappa"), std::move(samples));
        model.validate();
        return model;
    } catch (const ValidationError& e) {
        fail(g.field("table"), e.what());
    }
}

}  // namespace

bool OutputConfig::wants(std::string_view format) const {
    return std::find(formats.begin(), formats.end(), format) != formats.end();
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig cfg;
    cfg.sha256 = sha256_hex(text);
    const Section top(root, "", {"model", "params", "numerics", "outputs"});
    if (!top.has("model")) fail("model", "missing");
    if (!top.has("params")) fail("params", "missing");

    // model
    const Section model(top.at("model"), "model", {"N", "d", "h", "bc", "matrix_file"});
    if (model.has("matrix_file")) {
        for (const char* key : {"N", "d", "h", "bc"})
            if (model.has(key)) fail(model.field(key), "not allowed together with matrix_file");
        std::filesystem::path file = model.text("matrix_file");
        if (file.is_relative()) file = base_dir / file;
        if (!std::filesystem::exists(file)) fail(model.field("matrix_file"), "file not found: " + file.string());
        cfg.model.matrix_file = file;
        try {
            cfg.A = read_matrix_file(file);
        } catch (const ValidationError& e) {
            fail(model.field("matrix_file"), e.what());
        }
        cfg.model.N = cfg.A.n_side;
        cfg.model.d = cfg.A.dim;
    } else {
        if (!model.has("N")) fail(model.field("N"), "missing");
        const std::int64_t N = model.integer("N");
        if (N < 2) fail(model.field("N"), "must be >= 2");
        const std::int64_t d = model.has("d") ? model.integer("d") : 1;
        if (d < 1) fail(model.field("d"), "must be >= 1");
        cfg.model.h = model.has("h") ? model.number("h") : 1.0;
        if (!(cfg.model.h > 0.0)) fail(model.field("h"), "must be positive");
        if (model.has("bc")) {
            try {
                cfg.model.bc = parse_boundary(model.text("bc"));
            } catch (const ValidationError& e) {
                fail(model.field("bc"), e.what());
            }
        }
        double size = 1.0;
        for (std::int64_t i = 0; i < d; ++i) size *= static_cast<double>(N);
        if (size > static_cast<double>(kMaxLatticeSize))
            fail(model.field("N"), "N^d exceeds " + std::to_string(kMaxLatticeSize));
        cfg.model.N = static_cast<int>(N);
        cfg.model.d = static_cast<int>(d);
        cfg.A = build_laplacian(cfg.model.N, cfg.model.d, cfg.model.h, cfg.model.bc);
    }
    const SpectrumReport spectrum = validate_ha(cfg.A);
    if (!spectrum.ha_satisfied) fail("model", "coupling matrix rejected: " + spectrum.violation.value_or(""));
    const std::size_t n = cfg.A.size();

    // params
    const Section params(top.at("params"), "params", {"alpha", "K", "beta", "f", "eps", "g"});
    for (const char* key : {"alpha", "K"})
        if (!params.has(key)) fail(params.field(key), "missing");
    cfg.params.alpha = params.number("alpha");
    if (!(cfg.params.alpha > 0.0)) fail(params.field("alpha"), "must be positive");
    cfg.params.K = params.number("K");
    if (!(cfg.params.K > 0.0)) fail(params.field("K"), "must be positive");
    cfg.params.beta = params.has("beta") ? params.number("beta") : 0.0;
    cfg.params.f = broadcast(params, "f", n, 0.0);
    cfg.params.eps = broadcast(params, "eps", n, 0.0);
    if ((cfg.params.eps.array() < 0.0).any()) fail(params.field("eps"), "must be >= 0");
    cfg.params.g_model = parse_nonlinearity(params);
    cfg.params.validate(n);

    // numerics
    if (top.has("numerics")) {
        const Section num(top.at("numerics"), "numerics",
                          {"dt", "T", "n_seeds", "seed0", "n_cloud", "n_bins", "delta", "workers", "scheme",
                           "record_every", "substeps"});
        NumericsConfig& nc = cfg.numerics;
        if (num.has("dt")) nc.dt = num.number("dt");
        if (!(nc.dt > 0.0)) fail(num.field("dt"), "must be positive");
        if (num.has("T")) {
            nc.T = num.number("T");
            if (!(*nc.T > 0.0)) fail(num.field("T"), "must be positive");
        }
        auto positive_int = [&](const char* key, auto& target, std::int64_t lo) {
            if (!num.has(key)) return;
            const std::int64_t v = num.integer(key);
            if (v < lo) fail(num.field(key), "must be >= " + std::to_string(lo));
            target = static_cast<std::remove_reference_t<decltype(target)>>(v);
        };
        positive_int("n_seeds", nc.n_seeds, 1);
        positive_int("n_cloud", nc.n_cloud, 1);
        positive_int("n_bins", nc.n_bins, 3);
        positive_int("workers", nc.workers, 1);
        positive_int("record_every", nc.record_every, 1);
        positive_int("substeps", nc.substeps, 1);
        if (num.has("seed0")) nc.seed0 = num.unsigned_integer("seed0");
        if (num.has("delta")) {
            nc.delta = num.number("delta");
            if (!(*nc.delta > 0.0 && *nc.delta <= 1.0)) fail(num.field("delta"), "must lie in (0, 1]");
        }
        if (num.has("scheme")) {
            try {
                nc.scheme = parse_scheme(num.text("scheme"));
            } catch (const ValidationError& e) {
                fail(num.field("scheme"), e.what());
            }
        }
    }
    if (cfg.params.alpha * cfg.numerics.dt > 0.1) fail("numerics.dt", "alpha * dt must be <= 0.1");

    // outputs
    if (top.has("outputs")) {
        const Section out(top.at("outputs"), "outputs", {"directory", "formats"});
        if (out.has("directory")) {
            std::filesystem::path dir = out.text("directory");
            cfg.outputs.directory = dir.is_relative() ? base_dir / dir : dir;
        } else {
            cfg.outputs.directory = base_dir / cfg.outputs.directory;
        }
        if (out.has("formats")) {
            const json& formats = out.at("formats");
            if (!formats.is_array()) fail(out.field("formats"), "must be an array of strings");
            cfg.outputs.formats.clear();
            for (const auto& f : formats) {
                if (!f.is_string()) fail(out.field("formats"), "must be an array of strings");
                const auto name = f.get<std::string>();
                if (name != "csv" && name != "json") fail(out.field("formats"), "unknown format '" + name + "'");
                cfg.outputs.formats.push_back(name);
            }
        }
    } else {
        cfg.outputs.directory = base_dir / cfg.outputs.directory;
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("config: cannot open " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), path.parent_path().empty() ? "." : path.parent_path());
}

std::uint64_t derive_seed(std::uint64_t seed0, std::string_view tag, std::uint64_t index) {
    return seed0 + fnv1a64(tag) + index;
}

}  // namespace oscillattr
