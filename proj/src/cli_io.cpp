#include "gridnorm/cli_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "gridnorm/iid_tests.hpp"
#include "gridnorm/spatial_uit.hpp"

namespace gridnorm {

using nlohmann::json;

std::string format_double(double value) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw input_error("cannot open " + tmp.string() + " for writing");
        out << text;
        if (!out.flush()) throw input_error("failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

namespace {

double parse_double_token(const std::string& token, long line_no) {
    double value = 0.0;
    const char* begin = token.data();
    const char* end = begin + token.size();
    const auto res = std::from_chars(begin, end, value);
    if (res.ec != std::errc() || res.ptr != end || !std::isfinite(value)) {
        throw input_error("line " + std::to_string(line_no) +
                          ": non-numeric cell '" + token + "'");
    }
    return value;
}

int parse_int_token(const std::string& token, long line_no) {
    int value = 0;
    const char* begin = token.data();
    const char* end = begin + token.size();
    const auto res = std::from_chars(begin, end, value);
    if (res.ec != std::errc() || res.ptr != end) {
        throw input_error("line " + std::to_string(line_no) +
                          ": non-integer cell '" + token + "'");
    }
    return value;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string token;
    std::stringstream ss(line);
    while (std::getline(ss, token, ',')) out.push_back(token);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw input_error("cannot open " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

}  // namespace

LatticeField load_field_csv(const std::filesystem::path& path) {
    const std::vector<std::string> lines = read_lines(path);
    if (lines.empty()) throw input_error(path.string() + ": empty file");
    const std::vector<std::string> header = split_csv_line(lines[0]);
    if (header.size() < 3 || header[0] != "ix" || header[1] != "iy") {
        throw input_error(path.string() + ": header must be ix,iy,var_1,...");
    }
    const int p = static_cast<int>(header.size()) - 2;
    for (int l = 0; l < p; ++l) {
        if (header[2 + l] != "var_" + std::to_string(l + 1)) {
            throw input_error(path.string() + ": bad variable column '" +
                              header[2 + l] + "'");
        }
    }

    struct Row {
        int ix, iy;
        std::vector<double> values;
    };
    std::vector<Row> rows;
    int n_x = 0;
    int n_y = 0;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const long line_no = static_cast<long>(i + 1);
        const std::vector<std::string> cells = split_csv_line(lines[i]);
        if (cells.size() != header.size()) {
            throw input_error("line " + std::to_string(line_no) + ": expected " +
                              std::to_string(header.size()) + " cells, found " +
                              std::to_string(cells.size()));
        }
        Row row;
        row.ix = parse_int_token(cells[0], line_no);
        row.iy = parse_int_token(cells[1], line_no);
        if (row.ix < 1 || row.iy < 1) {
            throw input_error("line " + std::to_string(line_no) +
                              ": site indices must be >= 1");
        }
        for (int l = 0; l < p; ++l) {
            row.values.push_back(parse_double_token(cells[2 + l], line_no));
        }
        n_x = std::max(n_x, row.ix);
        n_y = std::max(n_y, row.iy);
        rows.push_back(std::move(row));
    }
    if (n_x < 2 || n_y < 2) throw input_error(path.string() + ": grid must be at least 2x2");

    LatticeSpec spec{n_x, n_y, 1.0 / (std::max(n_x, n_y) - 1)};
    LatticeField field{spec, p, Matrix(p, spec.site_count())};
    std::vector<bool> seen(spec.site_count(), false);
    for (const Row& row : rows) {
        const int s = spec.flat_index(row.ix, row.iy);
        if (seen[s]) {
            throw input_error(path.string() + ": duplicate site (" +
                              std::to_string(row.ix) + "," + std::to_string(row.iy) + ")");
        }
        seen[s] = true;
        for (int l = 0; l < p; ++l) field.values(l, s) = row.values[l];
    }
    for (int iy = 1; iy <= n_y; ++iy) {
        for (int ix = 1; ix <= n_x; ++ix) {
            if (!seen[spec.flat_index(ix, iy)]) {
                throw input_error(path.string() + ": missing site (" +
                                  std::to_string(ix) + "," + std::to_string(iy) + ")");
            }
        }
    }
    field.validate();
    return field;
}

void save_field_csv(const LatticeField& field, const std::filesystem::path& path) {
    field.validate();
    std::string text = "ix,iy";
    for (int l = 1; l <= field.p; ++l) text += ",var_" + std::to_string(l);
    text += "\n";
    for (int iy = 1; iy <= field.spec.n_y; ++iy) {
        for (int ix = 1; ix <= field.spec.n_x; ++ix) {
            text += std::to_string(ix) + "," + std::to_string(iy);
            const int s = field.spec.flat_index(ix, iy);
            for (int l = 0; l < field.p; ++l) {
                text += "," + format_double(field.values(l, s));
            }
            text += "\n";
        }
    }
    write_text_atomic(path, text);
}

std::string curves_csv(const std::vector<RejectionCurve>& curves) {
    std::string text = "test,h_star,rate,stderr,n_sim\n";
    for (const RejectionCurve& curve : curves) {
        for (std::size_t i = 0; i < curve.h_star.size(); ++i) {
            text += curve.test_name + "," + format_double(curve.h_star[i]) + "," +
                    format_double(curve.rate[i]) + "," +
                    format_double(curve.std_error[i]) + "," +
                    std::to_string(curve.n_sim) + "\n";
        }
    }
    return text;
}

std::string bundle_csv(const CurveBundle& bundle) {
    bundle.validate();
    std::string text = "curve,x,value\n";
    for (Eigen::Index c = 0; c < bundle.curves.rows(); ++c) {
        for (std::size_t i = 0; i < bundle.grid.size(); ++i) {
            text += std::to_string(c) + "," + format_double(bundle.grid[i]) + "," +
                    format_double(bundle.curves(c, static_cast<Eigen::Index>(i))) +
                    "\n";
        }
    }
    return text;
}

CurveBundle load_bundle_csv(const std::filesystem::path& path) {
    const std::vector<std::string> lines = read_lines(path);
    if (lines.empty() || split_csv_line(lines[0]) !=
                             std::vector<std::string>{"curve", "x", "value"}) {
        throw input_error(path.string() + ": header must be curve,x,value");
    }
    std::map<int, std::map<long, double>> per_curve;  // curve -> x order -> value
    std::vector<double> grid;
    std::map<double, long> x_index;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const long line_no = static_cast<long>(i + 1);
        const auto cells = split_csv_line(lines[i]);
        if (cells.size() != 3) {
            throw input_error("line " + std::to_string(line_no) +
                              ": expected 3 cells");
        }
        const int curve = parse_int_token(cells[0], line_no);
        const double x = parse_double_token(cells[1], line_no);
        const double v = parse_double_token(cells[2], line_no);
        auto [it, inserted] = x_index.try_emplace(x, static_cast<long>(grid.size()));
        if (inserted) grid.push_back(x);
        if (!per_curve[curve].emplace(it->second, v).second) {
            throw input_error("line " + std::to_string(line_no) +
                              ": duplicate (curve, x) entry");
        }
    }
    if (per_curve.empty()) throw input_error(path.string() + ": no curves found");
    CurveBundle bundle;
    bundle.grid = grid;
    bundle.curves.resize(static_cast<Eigen::Index>(per_curve.size()),
                         static_cast<Eigen::Index>(grid.size()));
    Eigen::Index row = 0;
    for (const auto& [curve, points] : per_curve) {
        if (points.size() != grid.size()) {
            throw input_error(path.string() + ": curve " + std::to_string(curve) +
                              " is missing grid points");
        }
        for (const auto& [col, v] : points) {
            bundle.curves(row, static_cast<Eigen::Index>(col)) = v;
        }
        ++row;
    }
    bundle.validate();
    return bundle;
}

std::string functional_summary_csv(const FunctionalSummary& summary,
                                   const CurveBundle& bundle) {
    std::string text = "x,median,central_lo,central_hi,fence_lo,fence_hi\n";
    for (std::size_t i = 0; i < bundle.grid.size(); ++i) {
        const auto col = static_cast<Eigen::Index>(i);
        text += format_double(bundle.grid[i]) + "," +
                format_double(summary.median[col]) + "," +
                format_double(summary.central_lo[col]) + "," +
                format_double(summary.central_hi[col]) + "," +
                format_double(summary.fence_lo[col]) + "," +
                format_double(summary.fence_hi[col]) + "\n";
    }
    return text;
}

std::string functional_depths_csv(const FunctionalSummary& summary) {
    std::string text = "curve,depth,is_median,is_outlier\n";
    const std::set<int> outliers(summary.outliers.begin(), summary.outliers.end());
    for (std::size_t i = 0; i < summary.depths.size(); ++i) {
        const int idx = static_cast<int>(i);
        text += std::to_string(idx) + "," + format_double(summary.depths[i]) + "," +
                (idx == summary.median_index ? "1" : "0") + "," +
                (outliers.count(idx) ? "1" : "0") + "\n";
    }
    return text;
}

// ---------------------------------------------------------------------------
// Configuration parsing
// ---------------------------------------------------------------------------

namespace {

json load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open config file " + path.string());
    json cfg;
    try {
        cfg = json::parse(in);
    } catch (const json::exception& e) {
        throw input_error("config " + path.string() + ": " + e.what());
    }
    if (!cfg.is_object()) throw input_error("config root must be a JSON object");
    return cfg;
}

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.count(key)) {
            throw input_error("config: unknown key '" + key + "' in " + where);
        }
    }
}

double get_number(const json& obj, const std::string& key) {
    if (!obj.contains(key)) throw input_error("config: missing key '" + key + "'");
    if (!obj[key].is_number()) {
        throw input_error("config: '" + key + "' must be a number");
    }
    return obj[key].get<double>();
}

double get_number_or(const json& obj, const std::string& key, double fallback) {
    return obj.contains(key) ? get_number(obj, key) : fallback;
}

int get_int(const json& obj, const std::string& key) {
    if (!obj.contains(key)) throw input_error("config: missing key '" + key + "'");
    if (!obj[key].is_number_integer()) {
        throw input_error("config: '" + key + "' must be an integer");
    }
    return obj[key].get<int>();
}

int get_int_or(const json& obj, const std::string& key, int fallback) {
    return obj.contains(key) ? get_int(obj, key) : fallback;
}

std::uint64_t get_seed_or(const json& obj, const std::string& key,
                          std::uint64_t fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number_unsigned() && !obj[key].is_number_integer()) {
        throw input_error("config: '" + key + "' must be an unsigned integer");
    }
    return obj[key].get<std::uint64_t>();
}

std::string get_string(const json& obj, const std::string& key) {
    if (!obj.contains(key)) throw input_error("config: missing key '" + key + "'");
    if (!obj[key].is_string()) {
        throw input_error("config: '" + key + "' must be a string");
    }
    return obj[key].get<std::string>();
}

CorrelationFamily family_from_name(const std::string& name) {
    if (name == "exponential") return CorrelationFamily::exponential;
    if (name == "whittle") return CorrelationFamily::whittle;
    throw input_error("unknown correlation family '" + name +
                      "' (expected exponential or whittle)");
}

std::string family_name(CorrelationFamily family) {
    return family == CorrelationFamily::exponential ? "exponential" : "whittle";
}

ProjectionSampler sampler_from_name(const std::string& name) {
    if (name == "sphere") return ProjectionSampler::sphere;
    if (name == "cosine") return ProjectionSampler::cosine;
    throw input_error("unknown projection sampler '" + name +
                      "' (expected sphere or cosine)");
}

std::string sampler_name(ProjectionSampler sampler) {
    return sampler == ProjectionSampler::sphere ? "sphere" : "cosine";
}

std::vector<double> get_double_list(const json& obj, const std::string& key) {
    if (!obj.contains(key) || !obj[key].is_array()) {
        throw input_error("config: '" + key + "' must be an array of numbers");
    }
    std::vector<double> out;
    for (const auto& v : obj[key]) {
        if (!v.is_number()) {
            throw input_error("config: '" + key + "' must contain only numbers");
        }
        out.push_back(v.get<double>());
    }
    return out;
}

std::vector<SasParams> parse_sas_list(const json& arr) {
    if (!arr.is_array() || arr.empty()) {
        throw input_error("config: 'sas' must be a nonempty array");
    }
    std::vector<SasParams> out;
    for (const auto& item : arr) {
        if (!item.is_object()) throw input_error("config: each SAS entry must be an object");
        reject_unknown_keys(item, {"epsilon", "delta"}, "sas entry");
        SasParams p{get_number(item, "epsilon"), get_number(item, "delta")};
        p.validate();
        out.push_back(p);
    }
    return out;
}

json sas_to_json(const std::vector<SasParams>& sas) {
    json arr = json::array();
    for (const auto& s : sas) arr.push_back({{"epsilon", s.epsilon}, {"delta", s.delta}});
    return arr;
}

// Flag overrides shared by the test/size/power commands.
struct CommonOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<double> alpha;
    std::optional<int> projections;
    std::optional<std::string> bandwidth;  // "auto" or integer text
    std::optional<std::string> tests;      // comma-separated names
};

std::optional<int> parse_bandwidth_text(const std::string& text) {
    if (text == "auto") return std::nullopt;
    int value = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size() || value < 1) {
        throw input_error("bandwidth must be 'auto' or a positive integer");
    }
    return value;
}

std::vector<TestKind> parse_tests_text(const std::string& text) {
    std::vector<TestKind> out;
    std::stringstream ss(text);
    std::string token;
    while (std::getline(ss, token, ',')) {
        if (!token.empty()) out.push_back(test_kind_from_name(token));
    }
    if (out.empty()) throw input_error("no tests enabled");
    return out;
}

std::optional<int> bandwidth_from_config(const json& cfg) {
    if (!cfg.contains("bandwidth")) return std::nullopt;
    if (cfg["bandwidth"].is_string()) {
        return parse_bandwidth_text(cfg["bandwidth"].get<std::string>());
    }
    if (cfg["bandwidth"].is_number_integer()) {
        const int b = cfg["bandwidth"].get<int>();
        if (b < 1) throw input_error("bandwidth must be >= 1");
        return b;
    }
    throw input_error("config: 'bandwidth' must be 'auto' or an integer");
}

SizeExperimentConfig parse_size_config(const json& cfg, const CommonOverrides& ov) {
    reject_unknown_keys(cfg,
                        {"grid_side", "p", "projections", "alpha", "h_star_grid",
                         "n_sim", "family", "thetas", "tests", "seed",
                         "common_random_numbers", "bandwidth", "sampler", "workers",
                         "sas"},
                        "experiment config");
    SizeExperimentConfig out;
    out.grid_side = get_int_or(cfg, "grid_side", out.grid_side);
    out.thetas = cfg.contains("thetas") ? get_double_list(cfg, "thetas") : out.thetas;
    out.p = get_int_or(cfg, "p", static_cast<int>(out.thetas.size()));
    out.n_projections = get_int_or(cfg, "projections", out.n_projections);
    out.alpha = get_number_or(cfg, "alpha", out.alpha);
    if (cfg.contains("h_star_grid")) out.h_star_grid = get_double_list(cfg, "h_star_grid");
    out.n_sim = get_int_or(cfg, "n_sim", out.n_sim);
    if (cfg.contains("family")) out.family = family_from_name(get_string(cfg, "family"));
    if (cfg.contains("tests")) {
        out.tests.clear();
        if (!cfg["tests"].is_array()) throw input_error("config: 'tests' must be an array");
        for (const auto& t : cfg["tests"]) {
            if (!t.is_string()) throw input_error("config: test names must be strings");
            out.tests.push_back(test_kind_from_name(t.get<std::string>()));
        }
    }
    out.master_seed = get_seed_or(cfg, "seed", out.master_seed);
    if (cfg.contains("common_random_numbers")) {
        if (!cfg["common_random_numbers"].is_boolean()) {
            throw input_error("config: 'common_random_numbers' must be a boolean");
        }
        out.common_random_numbers = cfg["common_random_numbers"].get<bool>();
    }
    out.bandwidth = bandwidth_from_config(cfg);
    if (cfg.contains("sampler")) out.sampler = sampler_from_name(get_string(cfg, "sampler"));
    if (cfg.contains("workers")) out.workers = get_int(cfg, "workers");

    if (ov.seed) out.master_seed = *ov.seed;
    if (ov.alpha) out.alpha = *ov.alpha;
    if (ov.projections) out.n_projections = *ov.projections;
    if (ov.bandwidth) out.bandwidth = parse_bandwidth_text(*ov.bandwidth);
    if (ov.tests) out.tests = parse_tests_text(*ov.tests);
    return out;
}

json size_config_echo(const SizeExperimentConfig& cfg) {
    json tests = json::array();
    for (TestKind t : cfg.tests) tests.push_back(test_kind_name(t));
    json echo{{"grid_side", cfg.grid_side},
              {"p", cfg.p},
              {"projections", cfg.n_projections},
              {"alpha", cfg.alpha},
              {"h_star_grid", cfg.effective_h_star_grid()},
              {"n_sim", cfg.n_sim},
              {"family", family_name(cfg.family)},
              {"thetas", cfg.thetas},
              {"tests", tests},
              {"seed", cfg.master_seed},
              {"common_random_numbers", cfg.common_random_numbers},
              {"sampler", sampler_name(cfg.sampler)}};
    echo["bandwidth"] = cfg.bandwidth ? json(*cfg.bandwidth) : json("auto");
    return echo;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct CommandIo {
    std::filesystem::path config_path;
    std::filesystem::path out_dir;
    CommonOverrides overrides;
    std::optional<std::string> field_path;  // test command
};

void ensure_out_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw input_error("cannot create output directory " + dir.string());
}

json tool_stamp() {
    return json{{"name", kToolName}, {"version", kToolVersion}};
}

void write_document(const std::filesystem::path& path, const json& doc) {
    write_text_atomic(path, doc.dump(2) + "\n");
}

int cmd_simulate(const CommandIo& io) {
    const json cfg = load_config_file(io.config_path);
    reject_unknown_keys(cfg,
                        {"grid", "model", "moving_average", "matern", "sas", "seed"},
                        "simulate config");
    if (!cfg.contains("grid") || !cfg["grid"].is_object()) {
        throw input_error("config: 'grid' object is required");
    }
    reject_unknown_keys(cfg["grid"], {"side", "n_x", "n_y", "spacing"}, "grid");
    LatticeSpec lattice;
    if (cfg["grid"].contains("side")) {
        lattice = LatticeSpec::unit_square(get_int(cfg["grid"], "side"));
    } else {
        lattice.n_x = get_int(cfg["grid"], "n_x");
        lattice.n_y = get_int(cfg["grid"], "n_y");
        lattice.spacing = get_number_or(
            cfg["grid"], "spacing", 1.0 / (std::max(lattice.n_x, lattice.n_y) - 1));
    }
    lattice.validate();

    std::uint64_t seed = get_seed_or(cfg, "seed", 0);
    if (io.overrides.seed) seed = *io.overrides.seed;

    const std::string model = get_string(cfg, "model");
    json echo{{"grid",
               {{"n_x", lattice.n_x}, {"n_y", lattice.n_y}, {"spacing", lattice.spacing}}},
              {"model", model},
              {"seed", seed}};

    LatticeField field;
    if (model == "moving_average") {
        if (!cfg.contains("moving_average") || !cfg["moving_average"].is_object()) {
            throw input_error("config: 'moving_average' object is required");
        }
        const json& ma = cfg["moving_average"];
        reject_unknown_keys(ma, {"thetas", "family", "h_star", "beta"}, "moving_average");
        MovingAverageSpec spec;
        spec.thetas = get_double_list(ma, "thetas");
        spec.family = family_from_name(get_string(ma, "family"));
        if (ma.contains("beta") == ma.contains("h_star")) {
            throw input_error("config: give exactly one of 'beta' and 'h_star'");
        }
        spec.beta = ma.contains("beta")
                        ? get_number(ma, "beta")
                        : solve_effective_range(spec.family, get_number(ma, "h_star"));
        spec.validate();
        echo["moving_average"] = {{"thetas", spec.thetas},
                                  {"family", family_name(spec.family)},
                                  {"beta", spec.beta}};
        RngStream stream(derive_seed(seed, 11));
        field = simulate_moving_average(spec, lattice, stream);
    } else if (model == "matern") {
        if (!cfg.contains("matern") || !cfg["matern"].is_object()) {
            throw input_error("config: 'matern' object is required");
        }
        const json& ma = cfg["matern"];
        reject_unknown_keys(
            ma, {"nu1", "nu2", "sigma2_1", "sigma2_2", "rho12", "h_star", "beta"},
            "matern");
        const double nu1 = get_number_or(ma, "nu1", 0.5);
        const double nu2 = get_number_or(ma, "nu2", 0.5);
        double beta = 0.0;
        if (ma.contains("beta") == ma.contains("h_star")) {
            throw input_error("config: give exactly one of 'beta' and 'h_star'");
        }
        if (ma.contains("beta")) {
            beta = get_number(ma, "beta");
        } else {
            if (nu1 != nu2 || (nu1 != 0.5 && nu1 != 1.0)) {
                throw input_error(
                    "h_star needs nu1 = nu2 = 0.5 (exponential) or 1 (whittle); "
                    "give beta directly otherwise");
            }
            beta = solve_effective_range(nu1 == 0.5 ? CorrelationFamily::exponential
                                                    : CorrelationFamily::whittle,
                                         get_number(ma, "h_star"));
        }
        BivariateMaternModel model_spec{
            MaternParams{get_number_or(ma, "sigma2_1", 1.0), nu1, beta},
            MaternParams{get_number_or(ma, "sigma2_2", 1.0), nu2, beta},
            get_number(ma, "rho12"), 2};
        model_spec.validate();
        echo["matern"] = {{"nu1", nu1},
                          {"nu2", nu2},
                          {"sigma2_1", model_spec.var1.sigma2},
                          {"sigma2_2", model_spec.var2.sigma2},
                          {"rho12", model_spec.rho12},
                          {"beta", beta}};
        RngStream stream(derive_seed(seed, 12));
        const int n = lattice.site_count();
        Vector noise(2 * n);
        for (int i = 0; i < 2 * n; ++i) noise[i] = stream.normal();
        field = sample_field(build_cross_covariance(model_spec, lattice), noise,
                             lattice, 2);
    } else {
        throw input_error("unknown model '" + model +
                          "' (expected moving_average or matern)");
    }

    if (cfg.contains("sas")) {
        const std::vector<SasParams> sas = parse_sas_list(cfg["sas"]);
        field = sas_inverse_transform(field, sas);
        echo["sas"] = sas_to_json(sas);
    }

    ensure_out_dir(io.out_dir);
    save_field_csv(field, io.out_dir / "field.csv");
    json doc{{"tool", tool_stamp()},
             {"command", "simulate"},
             {"config", echo},
             {"outputs", {{"field_csv", "field.csv"}}}};
    write_document(io.out_dir / "document.json", doc);
    return 0;
}

json outcome_to_json(const TestOutcome& outcome) {
    json j{{"statistic", outcome.statistic},
           {"p_value", outcome.p_value},
           {"alpha", outcome.alpha},
           {"reject", outcome.reject}};
    if (outcome.null_dist == NullDistribution::chi_squared) {
        j["null"] = {{"dist", "chi_squared"}, {"df", outcome.df}};
    } else {
        j["null"] = {{"dist", "standard_normal"}, {"sidedness", "two-sided"}};
    }
    return j;
}

int cmd_test(const CommandIo& io) {
    const json cfg = load_config_file(io.config_path);
    reject_unknown_keys(cfg,
                        {"field_csv", "alpha", "projections", "bandwidth", "tests",
                         "seed", "sampler"},
                        "test config");
    std::string field_path =
        cfg.contains("field_csv") ? get_string(cfg, "field_csv") : "";
    if (io.field_path) field_path = *io.field_path;
    if (field_path.empty()) {
        throw input_error("test command needs a field CSV ('field_csv' or --field)");
    }
    double alpha = get_number_or(cfg, "alpha", 0.05);
    int projections = get_int_or(cfg, "projections", 100);
    std::optional<int> bandwidth = bandwidth_from_config(cfg);
    std::vector<TestKind> tests = {TestKind::uit, TestKind::mardia_skewness,
                                   TestKind::mardia_kurtosis,
                                   TestKind::doornik_hansen};
    if (cfg.contains("tests")) {
        if (!cfg["tests"].is_array()) throw input_error("config: 'tests' must be an array");
        tests.clear();
        for (const auto& t : cfg["tests"]) {
            if (!t.is_string()) throw input_error("config: test names must be strings");
            tests.push_back(test_kind_from_name(t.get<std::string>()));
        }
    }
    std::uint64_t seed = get_seed_or(cfg, "seed", 0);
    ProjectionSampler sampler = cfg.contains("sampler")
                                    ? sampler_from_name(get_string(cfg, "sampler"))
                                    : ProjectionSampler::sphere;
    if (io.overrides.seed) seed = *io.overrides.seed;
    if (io.overrides.alpha) alpha = *io.overrides.alpha;
    if (io.overrides.projections) projections = *io.overrides.projections;
    if (io.overrides.bandwidth) bandwidth = parse_bandwidth_text(*io.overrides.bandwidth);
    if (io.overrides.tests) tests = parse_tests_text(*io.overrides.tests);
    if (tests.empty()) throw input_error("no tests enabled");

    const LatticeField field = load_field_csv(field_path);
    const KernelSpec kernel = bandwidth ? KernelSpec{*bandwidth, *bandwidth}
                                        : KernelSpec::auto_for(field.spec);

    json tests_json = json::object();
    json diagnostics{{"mk_sidedness", "two-sided"}};
    for (TestKind t : tests) {
        switch (t) {
            case TestKind::uit: {
                const UitReport report =
                    uit_test(field, projections, alpha, kernel, seed, sampler);
                json outcomes = json::array();
                for (std::size_t i = 0; i < report.outcomes.size(); ++i) {
                    const JbStarOutcome& o = report.outcomes[i];
                    outcomes.push_back({{"direction_index", report.outcome_direction[i]},
                                        {"s_n", o.s_n},
                                        {"k_n", o.k_n},
                                        {"phi_s2", o.phi_s2},
                                        {"phi_k2", o.phi_k2},
                                        {"statistic", o.statistic},
                                        {"p_value", o.p_value}});
                }
                json bh{{"r", report.bh.r},
                        {"n_rejected", report.bh.rejected.size()}};
                bh["threshold"] =
                    report.bh.threshold ? json(*report.bh.threshold) : json();
                tests_json["UIT"] = {{"reject", report.reject_h0},
                                     {"alpha", alpha},
                                     {"projections", projections},
                                     {"sampler", sampler_name(sampler)},
                                     {"seed", seed},
                                     {"kernel", {{"b_x", kernel.b_x}, {"b_y", kernel.b_y}}},
                                     {"bh", bh},
                                     {"outcomes", outcomes}};
                diagnostics["degenerate_projections"] = report.degenerate.size();
                diagnostics["variance_fallbacks"] = report.variance_fallback_count;
                break;
            }
            case TestKind::mardia_skewness:
                tests_json["MS"] = outcome_to_json(
                    mardia_skewness(field_as_sample(field), alpha));
                break;
            case TestKind::mardia_kurtosis:
                tests_json["MK"] = outcome_to_json(
                    mardia_kurtosis(field_as_sample(field), alpha));
                break;
            case TestKind::doornik_hansen:
                tests_json["DH"] = outcome_to_json(
                    doornik_hansen(field_as_sample(field), alpha));
                break;
        }
    }

    json tests_echo = json::array();
    for (TestKind t : tests) tests_echo.push_back(test_kind_name(t));
    json echo{{"field_csv", field_path},
              {"alpha", alpha},
              {"projections", projections},
              {"tests", tests_echo},
              {"seed", seed},
              {"sampler", sampler_name(sampler)}};
    echo["bandwidth"] = bandwidth ? json(*bandwidth) : json("auto");

    ensure_out_dir(io.out_dir);
    json doc{{"tool", tool_stamp()},
             {"command", "test"},
             {"config", echo},
             {"field", {{"n_x", field.spec.n_x}, {"n_y", field.spec.n_y}, {"p", field.p}}},
             {"tests", tests_json},
             {"diagnostics", diagnostics}};
    write_document(io.out_dir / "report.json", doc);
    return 0;
}

int cmd_size_or_power(const CommandIo& io, bool power) {
    const json cfg = load_config_file(io.config_path);
    const SizeExperimentConfig base = parse_size_config(cfg, io.overrides);

    std::vector<RejectionCurve> curves;
    json echo = size_config_echo(base);
    if (power) {
        if (!cfg.contains("sas")) {
            throw input_error("power config needs a 'sas' array");
        }
        PowerExperimentConfig pcfg{base, parse_sas_list(cfg["sas"])};
        pcfg.validate();
        echo["sas"] = sas_to_json(pcfg.sas);
        curves = run_power_experiment(pcfg);
    } else {
        base.validate();
        curves = run_size_experiment(base);
    }

    ensure_out_dir(io.out_dir);
    write_text_atomic(io.out_dir / "curves.csv", curves_csv(curves));
    json doc{{"tool", tool_stamp()},
             {"command", power ? "power" : "size"},
             {"config", echo},
             {"outputs", {{"curves_csv", "curves.csv"}}}};
    write_document(io.out_dir / "document.json", doc);
    return 0;
}

int cmd_summarize(const CommandIo& io) {
    const json cfg = load_config_file(io.config_path);
    const std::string mode = get_string(cfg, "mode");
    ensure_out_dir(io.out_dir);

    if (mode == "curves") {
        reject_unknown_keys(cfg, {"mode", "curves_csv"}, "summarize config");
        const std::string path = get_string(cfg, "curves_csv");
        const CurveBundle bundle = load_bundle_csv(path);
        const FunctionalSummary summary = functional_summary(bundle);
        write_text_atomic(io.out_dir / "summary.csv",
                          functional_summary_csv(summary, bundle));
        write_text_atomic(io.out_dir / "depths.csv", functional_depths_csv(summary));
        json doc{{"tool", tool_stamp()},
                 {"command", "summarize"},
                 {"config", {{"mode", "curves"}, {"curves_csv", path}}},
                 {"outputs",
                  {{"summary_csv", "summary.csv"}, {"depths_csv", "depths.csv"}}}};
        write_document(io.out_dir / "document.json", doc);
        return 0;
    }
    if (mode != "moment_drift") {
        throw input_error("unknown summarize mode '" + mode +
                          "' (expected moment_drift or curves)");
    }
    reject_unknown_keys(cfg,
                        {"mode", "grid_side", "family", "sigma2_1", "sigma2_2",
                         "rho12", "h_star_grid", "n_rep", "seed", "workers"},
                        "summarize config");
    MomentDriftConfig drift;
    drift.grid_side = get_int_or(cfg, "grid_side", drift.grid_side);
    if (cfg.contains("family")) drift.family = family_from_name(get_string(cfg, "family"));
    drift.sigma2_1 = get_number_or(cfg, "sigma2_1", drift.sigma2_1);
    drift.sigma2_2 = get_number_or(cfg, "sigma2_2", drift.sigma2_2);
    drift.rho12 = get_number_or(cfg, "rho12", drift.rho12);
    if (cfg.contains("h_star_grid")) drift.h_star_grid = get_double_list(cfg, "h_star_grid");
    drift.n_rep = get_int_or(cfg, "n_rep", drift.n_rep);
    drift.master_seed = get_seed_or(cfg, "seed", drift.master_seed);
    if (cfg.contains("workers")) drift.workers = get_int(cfg, "workers");
    if (io.overrides.seed) drift.master_seed = *io.overrides.seed;
    drift.validate();

    const MomentDriftResult result = run_moment_drift_experiment(drift);
    const FunctionalSummary skew_summary = functional_summary(result.skewness);
    const FunctionalSummary kurt_summary = functional_summary(result.kurtosis);
    write_text_atomic(io.out_dir / "curves_skewness.csv", bundle_csv(result.skewness));
    write_text_atomic(io.out_dir / "curves_kurtosis.csv", bundle_csv(result.kurtosis));
    write_text_atomic(io.out_dir / "summary_skewness.csv",
                      functional_summary_csv(skew_summary, result.skewness));
    write_text_atomic(io.out_dir / "summary_kurtosis.csv",
                      functional_summary_csv(kurt_summary, result.kurtosis));
    write_text_atomic(io.out_dir / "depths_skewness.csv",
                      functional_depths_csv(skew_summary));
    write_text_atomic(io.out_dir / "depths_kurtosis.csv",
                      functional_depths_csv(kurt_summary));

    json echo{{"mode", "moment_drift"},
              {"grid_side", drift.grid_side},
              {"family", family_name(drift.family)},
              {"sigma2_1", drift.sigma2_1},
              {"sigma2_2", drift.sigma2_2},
              {"rho12", drift.rho12},
              {"h_star_grid", drift.effective_h_star_grid()},
              {"n_rep", drift.n_rep},
              {"seed", drift.master_seed}};
    json doc{{"tool", tool_stamp()},
             {"command", "summarize"},
             {"config", echo},
             {"outputs",
              {{"curves_skewness_csv", "curves_skewness.csv"},
               {"curves_kurtosis_csv", "curves_kurtosis.csv"},
               {"summary_skewness_csv", "summary_skewness.csv"},
               {"summary_kurtosis_csv", "summary_kurtosis.csv"},
               {"depths_skewness_csv", "depths_skewness.csv"},
               {"depths_kurtosis_csv", "depths_kurtosis.csv"}}}};
    write_document(io.out_dir / "document.json", doc);
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Multivariate normality testing for gridded spatial data"};
    app.require_subcommand(1);

    auto add_common = [&](CLI::App* sub, CommandIo& io, bool with_field) {
        sub->add_option("--config", io.config_path, "JSON configuration file")
            ->required();
        sub->add_option("--out", io.out_dir, "output directory")->required();
        sub->add_option_function<std::uint64_t>(
            "--seed", [&io](std::uint64_t v) { io.overrides.seed = v; },
            "master seed override");
        sub->add_option_function<double>(
            "--alpha", [&io](double v) { io.overrides.alpha = v; },
            "significance level override");
        sub->add_option_function<int>(
            "--projections", [&io](int v) { io.overrides.projections = v; },
            "number of random projections override");
        sub->add_option_function<std::string>(
            "--bandwidth", [&io](std::string v) { io.overrides.bandwidth = v; },
            "kernel bandwidth override ('auto' or integer)");
        sub->add_option_function<std::string>(
            "--tests", [&io](std::string v) { io.overrides.tests = v; },
            "comma-separated tests (UIT,MS,MK,DH) override");
        if (with_field) {
            sub->add_option_function<std::string>(
                "--field", [&io](std::string v) { io.field_path = v; },
                "field CSV path override");
        }
    };

    CommandIo sim_io, test_io, size_io, power_io, summ_io;
    add_common(app.add_subcommand("simulate", "simulate a field and write a CSV"),
               sim_io, false);
    add_common(app.add_subcommand("test", "run normality tests on a field CSV"),
               test_io, true);
    add_common(app.add_subcommand("size", "type-I-error Monte Carlo study"),
               size_io, false);
    add_common(app.add_subcommand("power", "empirical-power Monte Carlo study"),
               power_io, false);
    add_common(app.add_subcommand("summarize", "functional summaries of curves"),
               summ_io, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 3;
    }

    try {
        if (app.got_subcommand("simulate")) return cmd_simulate(sim_io);
        if (app.got_subcommand("test")) return cmd_test(test_io);
        if (app.got_subcommand("size")) return cmd_size_or_power(size_io, false);
        if (app.got_subcommand("power")) return cmd_size_or_power(power_io, true);
        if (app.got_subcommand("summarize")) return cmd_summarize(summ_io);
        std::fprintf(stderr, "error: no subcommand given\n");
        return 3;
    } catch (const input_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const json::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const numeric_error& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    }
}

}  // namespace gridnorm
