#include "stefan/io.hpp"

#include "stefan/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace stefan::io {

namespace {

[[noreturn]] void config_error(const std::string& path, const std::string& msg) {
    throw Error(ErrorKind::Config, path + ": " + msg);
}

void check_keys(const Json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) config_error(path.empty() ? "<root>" : path, "expected an object");
    const std::set<std::string> keys(allowed.begin(), allowed.end());
    for (const auto& [key, value] : obj.items()) {
        if (!keys.contains(key)) config_error(path.empty() ? key : path + "." + key, "unknown field");
    }
}

std::string join(const std::string& path, const char* key) {
    return path.empty() ? std::string(key) : path + "." + key;
}

double get_number(const Json& obj, const std::string& path, const char* key, double fallback) {
    if (!obj.contains(key)) return fallback;
    const Json& v = obj.at(key);
    if (!v.is_number()) config_error(join(path, key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) config_error(join(path, key), "must be finite");
    return x;
}

int get_int(const Json& obj, const std::string& path, const char* key, int fallback) {
    if (!obj.contains(key)) return fallback;
    const Json& v = obj.at(key);
    if (v.is_number_integer()) return v.get<int>();
    if (v.is_number_float()) {
        const double x = v.get<double>();
        if (x == std::round(x) && std::abs(x) < 1e9) return static_cast<int>(x);
    }
    config_error(join(path, key), "expected an integer");
}

std::uint64_t get_seed(const Json& obj, const std::string& path, const char* key,
                       std::uint64_t fallback) {
    if (!obj.contains(key)) return fallback;
    const Json& v = obj.at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::uint64_t>(v.get<long long>());
    if (v.is_number_float()) {
        const double x = v.get<double>();
        if (x >= 0 && x == std::round(x) && x < 9e15) return static_cast<std::uint64_t>(x);
    }
    config_error(join(path, key), "expected a nonnegative integer");
}

std::string get_string(const Json& obj, const std::string& path, const char* key,
                       const std::string& fallback = {}) {
    if (!obj.contains(key)) return fallback;
    const Json& v = obj.at(key);
    if (!v.is_string()) config_error(join(path, key), "expected a string");
    return v.get<std::string>();
}

std::vector<std::pair<double, double>> get_pairs(const Json& obj, const std::string& path,
                                                 const char* key) {
    const std::string p = join(path, key);
    const Json& v = obj.at(key);
    if (!v.is_array() || v.empty()) config_error(p, "expected a nonempty array of [x, y] pairs");
    std::vector<std::pair<double, double>> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const Json& row = v[i];
        if (!row.is_array() || row.size() != 2 || !row[0].is_number() || !row[1].is_number()) {
            config_error(p + "[" + std::to_string(i) + "]", "expected a pair of numbers");
        }
        out.emplace_back(row[0].get<double>(), row[1].get<double>());
    }
    return out;
}

const Json& sub(const Json& doc, const char* key) {
    static const Json empty = Json::object();
    return doc.contains(key) ? doc.at(key) : empty;
}

std::string format_number(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        const auto a = cell.find_first_not_of(" \t\r");
        const auto b = cell.find_last_not_of(" \t\r");
        out.push_back(a == std::string::npos ? std::string() : cell.substr(a, b - a + 1));
    }
    return out;
}

double parse_double(const std::string& s, const std::string& where) {
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size() || !std::isfinite(x)) {
        throw Error(ErrorKind::Io, where + ": cannot parse number '" + s + "'");
    }
    return x;
}

// "# <magic> v1, k=v, k=v" -> key/value map
std::map<std::string, std::string> parse_header(const std::string& line, const std::string& magic) {
    const std::string prefix = "# " + magic + " v1";
    if (line.rfind(prefix, 0) != 0) {
        throw Error(ErrorKind::Io, "expected header starting with '" + prefix + "'");
    }
    std::map<std::string, std::string> out;
    const auto fields = split_csv(line.substr(prefix.size()));
    for (const auto& f : fields) {
        if (f.empty()) continue;
        const auto eq = f.find('=');
        if (eq == std::string::npos) throw Error(ErrorKind::Io, "malformed header field '" + f + "'");
        out[f.substr(0, eq)] = f.substr(eq + 1);
    }
    return out;
}

std::string mode_name(Mode m) {
    switch (m) {
        case Mode::Forward: return "forward";
        case Mode::Invert: return "invert";
        case Mode::Perturb: return "perturb";
        case Mode::Roundtrip: return "roundtrip";
    }
    return "?";
}

} // namespace

double ScheduleSpec::evaluate(double t) const {
    if (preset == "quadratic") return forward::quadratic_melting(t);
    if (preset == "cosine") return forward::cosine_melting(t);
    if (t <= samples.front().first) return samples.front().second;
    if (t >= samples.back().first) return samples.back().second;
    auto hi = std::upper_bound(samples.begin(), samples.end(), t,
                               [](double x, const auto& s) { return x < s.first; });
    auto lo = std::prev(hi);
    const double w = (t - lo->first) / (hi->first - lo->first);
    return lo->second + w * (hi->second - lo->second);
}

forward::InitialField InitialFieldSpec::build(double um0) const {
    if (constant) return forward::InitialField::constant(*constant);
    if (!radial.empty()) return forward::InitialField::radial(radial);
    return forward::InitialField::constant(um0);
}

RunConfig parse_config(const Json& doc) {
    check_keys(doc, "", {"mode", "geometry", "time", "schedule", "initial_field", "noise", "inverse",
                         "paths"});
    RunConfig cfg;

    const std::string mode = get_string(doc, "", "mode", "forward");
    if (mode == "forward") cfg.mode = Mode::Forward;
    else if (mode == "invert") cfg.mode = Mode::Invert;
    else if (mode == "perturb") cfg.mode = Mode::Perturb;
    else if (mode == "roundtrip") cfg.mode = Mode::Roundtrip;
    else config_error("mode", "unknown mode '" + mode + "' (forward|invert|perturb|roundtrip)");

    const Json& geo = sub(doc, "geometry");
    check_keys(geo, "geometry", {"M", "L", "rings", "symmetry", "initial"});
    auto& g = cfg.geometry;
    g.order = get_int(geo, "geometry", "M", g.order);
    g.boundary_vertices = get_int(geo, "geometry", "L", g.boundary_vertices);
    g.rings = get_int(geo, "geometry", "rings", g.rings);
    g.symmetry = get_int(geo, "geometry", "symmetry", g.symmetry);
    if (g.order < 0) config_error("geometry.M", "must be nonnegative");
    if (g.boundary_vertices < 8) config_error("geometry.L", "must be at least 8");
    if (g.boundary_vertices <= 2 * g.order + 1) {
        config_error("geometry.L", "must exceed 2M+1 = " + std::to_string(2 * g.order + 1));
    }
    if (g.rings < 2) config_error("geometry.rings", "must be at least 2");
    if (g.symmetry < 0 || (g.symmetry > 0 && g.boundary_vertices % g.symmetry != 0)) {
        config_error("geometry.symmetry", "must be 0 (auto) or a divisor of geometry.L");
    }

    const Json& init = sub(geo, "initial");
    check_keys(init, "geometry.initial", {"type", "radius", "amplitude", "seed", "coeffs"});
    const std::string type = get_string(init, "geometry.initial", "type", "random");
    if (type == "circle") g.initial.kind = InitialShape::Kind::Circle;
    else if (type == "random") g.initial.kind = InitialShape::Kind::Random;
    else if (type == "coefficients") g.initial.kind = InitialShape::Kind::Coefficients;
    else config_error("geometry.initial.type", "unknown shape '" + type + "' (circle|random|coefficients)");
    g.initial.radius = get_number(init, "geometry.initial", "radius", 1.0);
    g.initial.amplitude = get_number(init, "geometry.initial", "amplitude", 0.1);
    g.initial.seed = get_seed(init, "geometry.initial", "seed", 1);
    if (!(g.initial.radius > 0.0)) config_error("geometry.initial.radius", "must be positive");
    if (g.initial.amplitude < 0.0) config_error("geometry.initial.amplitude", "must be nonnegative");
    if (g.initial.kind == InitialShape::Kind::Coefficients) {
        if (!init.contains("coeffs") || !init.at("coeffs").is_array()) {
            config_error("geometry.initial.coeffs", "required array for type 'coefficients'");
        }
        for (const auto& c : init.at("coeffs")) {
            if (!c.is_number()) config_error("geometry.initial.coeffs", "expected numbers");
            g.initial.coeffs.push_back(c.get<double>());
        }
        if (g.initial.coeffs.size() % 2 == 0) {
            config_error("geometry.initial.coeffs", "expected an odd count 2M+1");
        }
    }

    const Json& time = sub(doc, "time");
    check_keys(time, "time", {"dt", "T"});
    cfg.time.dt = get_number(time, "time", "dt", cfg.time.dt);
    cfg.time.final_time = get_number(time, "time", "T", cfg.time.final_time);
    if (!(cfg.time.dt > 0.0)) config_error("time.dt", "must be positive");
    if (!(cfg.time.final_time > 0.0)) config_error("time.T", "must be positive");
    const double ratio = cfg.time.final_time / cfg.time.dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio)) {
        config_error("time.T", "must be an integer multiple of time.dt");
    }

    if (doc.contains("schedule")) {
        const Json& s = doc.at("schedule");
        check_keys(s, "schedule", {"preset", "samples"});
        ScheduleSpec spec;
        spec.preset = get_string(s, "schedule", "preset");
        if (!spec.preset.empty() && spec.preset != "quadratic" && spec.preset != "cosine") {
            config_error("schedule.preset", "unknown preset '" + spec.preset + "' (quadratic|cosine)");
        }
        if (spec.preset.empty()) {
            if (!s.contains("samples")) config_error("schedule", "needs either preset or samples");
            spec.samples = get_pairs(s, "schedule", "samples");
            for (std::size_t i = 1; i < spec.samples.size(); ++i) {
                if (!(spec.samples[i].first > spec.samples[i - 1].first)) {
                    config_error("schedule.samples", "times must be strictly increasing");
                }
            }
        }
        cfg.schedule = spec;
    }

    if (doc.contains("initial_field")) {
        const Json& f = doc.at("initial_field");
        check_keys(f, "initial_field", {"constant", "radial"});
        InitialFieldSpec spec;
        if (f.contains("constant")) spec.constant = get_number(f, "initial_field", "constant", 0.0);
        if (f.contains("radial")) {
            spec.radial = get_pairs(f, "initial_field", "radial");
            for (const auto& [s, u] : spec.radial) {
                if (s < 0.0 || s > 1.0) config_error("initial_field.radial", "reference radius must lie in [0, 1]");
            }
        }
        if (spec.constant && !spec.radial.empty()) {
            config_error("initial_field", "give either constant or radial, not both");
        }
        cfg.initial_field = spec;
    }

    const Json& noise = sub(doc, "noise");
    check_keys(noise, "noise", {"delta", "seed"});
    cfg.noise.delta = get_number(noise, "noise", "delta", 0.0);
    cfg.noise.seed = get_seed(noise, "noise", "seed", 0);
    if (cfg.noise.delta < 0.0) config_error("noise.delta", "must be nonnegative");

    const Json& inv = sub(doc, "inverse");
    check_keys(inv, "inverse", {"M", "L", "rings", "symmetry", "um0"});
    auto& iv = cfg.inverse;
    iv.order = get_int(inv, "inverse", "M", g.order);
    iv.boundary_vertices = get_int(inv, "inverse", "L", g.boundary_vertices);
    iv.rings = get_int(inv, "inverse", "rings", g.rings);
    iv.symmetry = get_int(inv, "inverse", "symmetry", inv.contains("L") ? 0 : g.symmetry);
    if (inv.contains("um0")) iv.um0 = get_number(inv, "inverse", "um0", 0.0);
    if (iv.order < 0) config_error("inverse.M", "must be nonnegative");
    if (iv.boundary_vertices < 8) config_error("inverse.L", "must be at least 8");
    if (iv.boundary_vertices <= 2 * iv.order + 1) {
        config_error("inverse.L", "must exceed 2M+1 = " + std::to_string(2 * iv.order + 1));
    }
    if (iv.rings < 2) config_error("inverse.rings", "must be at least 2");
    if (iv.symmetry < 0 || (iv.symmetry > 0 && iv.boundary_vertices % iv.symmetry != 0)) {
        config_error("inverse.symmetry", "must be 0 (auto) or a divisor of inverse.L");
    }

    const Json& paths = sub(doc, "paths");
    check_keys(paths, "paths", {"input_tube", "output_tube", "noisy_tube", "output_schedule",
                                "residual_log", "snapshots", "report", "plots", "out"});
    auto& p = cfg.paths;
    p.input_tube = get_string(paths, "paths", "input_tube");
    p.output_tube = get_string(paths, "paths", "output_tube");
    p.noisy_tube = get_string(paths, "paths", "noisy_tube");
    p.output_schedule = get_string(paths, "paths", "output_schedule");
    p.residual_log = get_string(paths, "paths", "residual_log");
    p.snapshots = get_string(paths, "paths", "snapshots");
    p.report = get_string(paths, "paths", "report");
    p.plots = get_string(paths, "paths", "plots");
    const std::string out = get_string(paths, "paths", "out");
    if (!out.empty()) {
        switch (cfg.mode) {
            case Mode::Forward:
            case Mode::Perturb: p.output_tube = out; break;
            case Mode::Invert: p.output_schedule = out; break;
            case Mode::Roundtrip: p.report = out; break;
        }
    }

    const std::string m = mode_name(cfg.mode);
    auto need = [&](const std::string& value, const char* field) {
        if (value.empty()) config_error(std::string("paths.") + field, "required for mode " + m);
    };
    switch (cfg.mode) {
        case Mode::Forward:
            if (!cfg.schedule) config_error("schedule", "required for mode forward");
            need(p.output_tube, "output_tube");
            break;
        case Mode::Perturb:
            need(p.input_tube, "input_tube");
            need(p.output_tube, "output_tube");
            break;
        case Mode::Invert:
            need(p.input_tube, "input_tube");
            need(p.output_schedule, "output_schedule");
            break;
        case Mode::Roundtrip:
            if (!cfg.schedule) config_error("schedule", "required for mode roundtrip");
            need(p.report, "report");
            break;
    }
    return cfg;
}

Json load_config_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open config file " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw Error(ErrorKind::Config, path.string() + ": " + e.what());
    }
}

void set_config_value(Json& doc, const std::string& dotted_key, Json value) {
    require(!dotted_key.empty(), "empty config key");
    if (!doc.is_object()) doc = Json::object();
    Json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = dotted_key.find('.', start);
        const std::string part = dotted_key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        require(!part.empty(), "malformed config key '" + dotted_key + "'");
        if (dot == std::string::npos) {
            (*node)[part] = std::move(value);
            return;
        }
        Json& child = (*node)[part];
        if (!child.is_object()) child = Json::object();
        node = &child;
        start = dot + 1;
    }
}

forward::MeltingSchedule prescribed_schedule(const RunConfig& cfg) {
    require(cfg.schedule.has_value(), "no melting schedule configured");
    const auto steps = static_cast<int>(std::lround(cfg.time.final_time / cfg.time.dt));
    const ScheduleSpec spec = *cfg.schedule;
    return forward::MeltingSchedule::sample([&](double t) { return spec.evaluate(t); }, cfg.time.dt, steps);
}

forward::ForwardParams forward_params(const RunConfig& cfg) {
    forward::ForwardParams p;
    p.dt = cfg.time.dt;
    p.final_time = cfg.time.final_time;
    p.order = cfg.geometry.order;
    p.boundary_vertices = cfg.geometry.boundary_vertices;
    p.rings = cfg.geometry.rings;
    p.symmetry = cfg.geometry.symmetry;
    const auto& init = cfg.geometry.initial;
    switch (init.kind) {
        case InitialShape::Kind::Circle:
            p.initial_boundary = geometry::FourierBoundary::circle(init.radius, p.order);
            break;
        case InitialShape::Kind::Random:
            p.initial_boundary = forward::random_star_boundary(p.order, init.amplitude, init.seed);
            break;
        case InitialShape::Kind::Coefficients: {
            const int m = static_cast<int>(init.coeffs.size() / 2);
            p.initial_boundary = geometry::FourierBoundary(m, init.coeffs).with_order(p.order);
            break;
        }
    }
    p.schedule = prescribed_schedule(cfg);
    if (cfg.initial_field) p.initial_field = cfg.initial_field->build(p.schedule.values().front());
    return p;
}

inverse::InverseParams inverse_params(const RunConfig& cfg, double default_um0) {
    inverse::InverseParams p;
    p.order = cfg.inverse.order;
    p.boundary_vertices = cfg.inverse.boundary_vertices;
    p.rings = cfg.inverse.rings;
    p.symmetry = cfg.inverse.symmetry;
    p.um0 = cfg.inverse.um0.value_or(default_um0);
    if (cfg.initial_field) p.initial_field = cfg.initial_field->build(p.um0);
    return p;
}

void write_tube(std::ostream& out, const inverse::ObservedTube& tube) {
    const auto& t = tube.tube;
    out << "# stefan-tube v1, M=" << t.order << ", dt=" << format_number(t.dt)
        << ", delta=" << format_number(tube.delta) << ", seed=" << tube.seed;
    if (!tube.source.empty()) out << ", source=" << tube.source;
    out << '\n';
    for (const auto& rec : t.records) {
        out << format_number(rec.time);
        for (double c : rec.boundary.coeffs()) out << ", " << format_number(c);
        out << '\n';
    }
}

void write_tube(const fs::path& path, const inverse::ObservedTube& tube) {
    std::ostringstream ss;
    write_tube(ss, tube);
    write_atomic(path, ss.str());
}

inverse::ObservedTube read_tube(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::Io, "empty tube file");
    const auto header = parse_header(line, "stefan-tube");
    if (!header.contains("M") || !header.contains("dt")) {
        throw Error(ErrorKind::Io, "tube header needs M and dt");
    }
    inverse::ObservedTube out;
    const double m = parse_double(header.at("M"), "tube header M");
    if (m < 0 || m != std::round(m)) throw Error(ErrorKind::Io, "tube header M must be a nonnegative integer");
    out.tube.order = static_cast<int>(m);
    out.tube.dt = parse_double(header.at("dt"), "tube header dt");
    if (!(out.tube.dt > 0.0)) throw Error(ErrorKind::Io, "tube header dt must be positive");
    if (header.contains("delta")) out.delta = parse_double(header.at("delta"), "tube header delta");
    if (header.contains("seed")) out.seed = std::stoull(header.at("seed"));
    if (header.contains("source")) out.source = header.at("source");

    const std::size_t width = 2 * static_cast<std::size_t>(out.tube.order) + 2;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line[0] == '#') continue;
        const auto cells = split_csv(line);
        const std::string where = "tube row " + std::to_string(row);
        if (cells.size() != width) {
            throw Error(ErrorKind::Io, where + ": expected " + std::to_string(width) + " columns, got " +
                                           std::to_string(cells.size()));
        }
        forward::TubeRecord rec;
        rec.time = parse_double(cells[0], where);
        std::vector<double> coeffs(width - 1);
        for (std::size_t i = 1; i < width; ++i) coeffs[i - 1] = parse_double(cells[i], where);
        rec.boundary = geometry::FourierBoundary(out.tube.order, std::move(coeffs));
        if (!out.tube.records.empty() && !(rec.time > out.tube.records.back().time)) {
            throw Error(ErrorKind::Io, where + ": times must be strictly increasing");
        }
        out.tube.records.push_back(std::move(rec));
    }
    if (out.tube.records.empty()) throw Error(ErrorKind::Io, "tube file has no records");
    return out;
}

inverse::ObservedTube read_tube(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open tube file " + path.string());
    return read_tube(in);
}

void write_schedule(std::ostream& out, const forward::MeltingSchedule& schedule) {
    const auto& v = schedule.values();
    const auto& s = schedule.slopes();
    require(!v.empty(), "cannot write an empty schedule");
    out << "# stefan-schedule v1, um0=" << format_number(v.front())
        << ", dt=" << format_number(schedule.dt()) << '\n';
    for (std::size_t k = 0; k < v.size(); ++k) {
        const double slope = s.empty() ? 0.0 : s[std::min(k, s.size() - 1)];
        out << format_number(schedule.time(static_cast<int>(k))) << ", " << format_number(v[k]) << ", "
            << format_number(slope) << '\n';
    }
}

void write_schedule(const fs::path& path, const forward::MeltingSchedule& schedule) {
    std::ostringstream ss;
    write_schedule(ss, schedule);
    write_atomic(path, ss.str());
}

forward::MeltingSchedule read_schedule(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::Io, "empty schedule file");
    const auto header = parse_header(line, "stefan-schedule");
    std::vector<double> times, values, slopes;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line[0] == '#') continue;
        const auto cells = split_csv(line);
        const std::string where = "schedule row " + std::to_string(row);
        if (cells.size() != 3) throw Error(ErrorKind::Io, where + ": expected 3 columns");
        times.push_back(parse_double(cells[0], where));
        values.push_back(parse_double(cells[1], where));
        slopes.push_back(parse_double(cells[2], where));
        if (times.size() > 1 && !(times.back() > times[times.size() - 2])) {
            throw Error(ErrorKind::Io, where + ": times must be strictly increasing");
        }
    }
    if (times.size() < 2) throw Error(ErrorKind::Io, "schedule file needs at least two rows");
    const double dt = header.contains("dt") ? parse_double(header.at("dt"), "schedule header dt")
                                            : times[1] - times[0];
    if (header.contains("um0")) {
        const double um0 = parse_double(header.at("um0"), "schedule header um0");
        if (um0 != values.front()) throw Error(ErrorKind::Io, "schedule header um0 disagrees with the first row");
    }
    slopes.pop_back();
    try {
        return forward::MeltingSchedule::from_table(dt, std::move(values), std::move(slopes));
    } catch (const Error& e) {
        throw Error(ErrorKind::Io, std::string("schedule file: ") + e.what());
    }
}

forward::MeltingSchedule read_schedule(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open schedule file " + path.string());
    return read_schedule(in);
}

void write_snapshot(const fs::path& path, const forward::FieldSnapshot& snapshot) {
    std::ostringstream ss;
    ss << "# t=" << format_number(snapshot.time) << '\n';
    for (std::size_t i = 0; i < snapshot.vertices.size(); ++i) {
        ss << format_number(snapshot.vertices[i][0]) << ", " << format_number(snapshot.vertices[i][1])
           << ", " << format_number(snapshot.field.values[static_cast<Eigen::Index>(i)]) << '\n';
    }
    write_atomic(path, ss.str());
}

void write_atomic(const fs::path& path, const std::string& contents) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::Io, "cannot write " + tmp.string());
        out << contents;
        out.flush();
        if (!out) throw Error(ErrorKind::Io, "failed writing " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

ScheduleComparison compare_schedules(const forward::MeltingSchedule& reconstructed,
                                     const forward::MeltingSchedule& truth) {
    const auto& rv = reconstructed.values();
    const auto& tv = truth.values();
    const auto& rs = reconstructed.slopes();
    const auto& ts = truth.slopes();
    require(rv.size() <= tv.size(), "reconstructed schedule is longer than the reference");
    ScheduleComparison c;
    double err2 = 0.0, ref2 = 0.0;
    for (std::size_t k = 0; k < rv.size(); ++k) {
        const double e = rv[k] - tv[k];
        c.max_error_um = std::max(c.max_error_um, std::abs(e));
        err2 += e * e;
        ref2 += tv[k] * tv[k];
    }
    c.l2_error_um = std::sqrt(err2 * truth.dt());
    c.relative_l2_error_um = ref2 > 0.0 ? std::sqrt(err2 / ref2) : std::sqrt(err2);
    err2 = ref2 = 0.0;
    for (std::size_t k = 0; k < rs.size(); ++k) {
        const double e = rs[k] - ts[k];
        c.max_error_rate = std::max(c.max_error_rate, std::abs(e));
        err2 += e * e;
        ref2 += ts[k] * ts[k];
    }
    c.l2_error_rate = std::sqrt(err2 * truth.dt());
    c.relative_l2_error_rate = ref2 > 0.0 ? std::sqrt(err2 / ref2) : std::sqrt(err2);
    return c;
}

void export_plot_data(const fs::path& dir, const forward::SpaceTimeTube& tube, std::size_t samples,
                      const std::vector<PlotSeries>& series) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create plot directory " + dir.string());

    std::ostringstream poly;
    poly << "record, t, i, phi, x, y\n";
    double extent = 0.0;
    std::vector<std::vector<geometry::Point>> curves;
    for (std::size_t k = 0; k < tube.records.size(); ++k) {
        const auto& rec = tube.records[k];
        const auto r = rec.boundary.sample(samples);
        std::vector<geometry::Point> pts;
        for (std::size_t i = 0; i < samples; ++i) {
            const double phi = geometry::angle_of_sample(i, samples);
            const geometry::Point p{r[i] * std::cos(phi), r[i] * std::sin(phi)};
            pts.push_back(p);
            extent = std::max({extent, std::abs(p[0]), std::abs(p[1])});
            poly << k << ", " << format_number(rec.time) << ", " << i << ", " << format_number(phi) << ", "
                 << format_number(p[0]) << ", " << format_number(p[1]) << '\n';
        }
        curves.push_back(std::move(pts));
    }
    write_atomic(dir / "boundary_polylines.csv", poly.str());

    std::ostringstream ser;
    ser << "label, t, u_m, du_m\n";
    for (const auto& s : series) {
        const auto& v = s.schedule.values();
        const auto& sl = s.schedule.slopes();
        for (std::size_t k = 0; k < v.size(); ++k) {
            const double slope = sl.empty() ? 0.0 : sl[std::min(k, sl.size() - 1)];
            ser << s.label << ", " << format_number(s.schedule.time(static_cast<int>(k))) << ", "
                << format_number(v[k]) << ", " << format_number(slope) << '\n';
        }
    }
    write_atomic(dir / "schedule_series.csv", ser.str());

    // Top view of all sections, colour running from blue (t=0) to red (t=T).
    const double size = 400.0;
    const double scale = extent > 0.0 ? 0.45 * size / extent : 1.0;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
        << "\" viewBox=\"0 0 " << size << ' ' << size << "\">\n";
    for (std::size_t k = 0; k < curves.size(); ++k) {
        const double w = curves.size() > 1 ? static_cast<double>(k) / static_cast<double>(curves.size() - 1) : 0.0;
        svg << "<polygon fill=\"none\" stroke-width=\"0.6\" stroke=\"rgb(" << static_cast<int>(255 * w) << ",0,"
            << static_cast<int>(255 * (1 - w)) << ")\" points=\"";
        for (const auto& p : curves[k]) {
            svg << std::fixed << std::setprecision(2) << size / 2 + scale * p[0] << ','
                << size / 2 - scale * p[1] << ' ';
        }
        svg << "\"/>\n";
    }
    svg << "</svg>\n";
    write_atomic(dir / "tube_boundaries.svg", svg.str());
}

int run(const RunConfig& cfg, std::ostream& log) {
    switch (cfg.mode) {
        case Mode::Forward: {
            auto params = forward_params(cfg);
            params.keep_fields = !cfg.paths.snapshots.empty();
            log << "forward: " << params.steps() << " steps, M=" << params.order << ", L="
                << params.boundary_vertices << ", rings=" << params.rings << '\n';
            const auto result = forward::simulate_forward(params);
            inverse::ObservedTube out{result.tube, 0.0, cfg.geometry.initial.seed, "forward"};
            write_tube(cfg.paths.output_tube, out);
            log << "wrote " << result.tube.size() << " records to " << cfg.paths.output_tube << '\n';
            for (std::size_t k = 0; k < result.sign_check.size(); ++k) {
                const auto [lo, hi] = result.sign_check[k];
                if (lo < 0.0 && hi > 0.0) {
                    log << "note: front speed changes sign along the boundary at step " << k << " (-dv/dn in ["
                        << lo << ", " << hi << "])\n";
                }
            }
            if (!cfg.paths.snapshots.empty()) {
                for (const auto& snap : result.fields) {
                    char name[32];
                    std::snprintf(name, sizeof name, "snapshot_%04d.csv", snap.field.time_index);
                    write_snapshot(fs::path(cfg.paths.snapshots) / name, snap);
                }
            }
            if (!cfg.paths.plots.empty()) {
                export_plot_data(cfg.paths.plots, result.tube,
                                 static_cast<std::size_t>(cfg.geometry.boundary_vertices),
                                 {{"truth", params.schedule}});
            }
            return 0;
        }
        case Mode::Perturb: {
            const auto in = read_tube(cfg.paths.input_tube);
            auto out = inverse::add_noise(in.tube, cfg.noise.delta, cfg.noise.seed,
                                          static_cast<std::size_t>(cfg.geometry.boundary_vertices));
            out.source = in.source.empty() ? "perturb" : in.source + "+noise";
            if (cfg.noise.delta == 0.0) out = in;
            write_tube(cfg.paths.output_tube, out);
            log << "perturbed " << in.tube.size() << " records with delta=" << cfg.noise.delta
                << ", seed=" << cfg.noise.seed << '\n';
            return 0;
        }
        case Mode::Invert: {
            const auto obs = read_tube(cfg.paths.input_tube);
            const auto params = inverse_params(cfg, 0.0);
            const auto rec = inverse::reconstruct_schedule(obs, params);
            write_schedule(cfg.paths.output_schedule, rec.schedule);
            std::ostringstream res;
            res << "step, t, residual\n";
            for (std::size_t k = 0; k < rec.residuals.size(); ++k) {
                res << k << ", " << format_number(rec.schedule.time(static_cast<int>(k))) << ", "
                    << format_number(rec.residuals[k]) << '\n';
            }
            const std::string res_path =
                cfg.paths.residual_log.empty() ? cfg.paths.output_schedule + ".residuals.csv" : cfg.paths.residual_log;
            write_atomic(res_path, res.str());
            log << "reconstructed " << rec.schedule.steps() << " slopes (um0=" << params.um0 << ") into "
                << cfg.paths.output_schedule << '\n';
            if (!cfg.paths.plots.empty()) {
                export_plot_data(cfg.paths.plots, obs.tube, static_cast<std::size_t>(params.boundary_vertices),
                                 {{"reconstructed", rec.schedule}});
            }
            return 0;
        }
        case Mode::Roundtrip: {
            const auto fparams = forward_params(cfg);
            log << "roundtrip: forward " << fparams.steps() << " steps\n";
            const auto result = forward::simulate_forward(fparams);
            inverse::ObservedTube clean{result.tube, 0.0, cfg.geometry.initial.seed, "forward"};
            if (!cfg.paths.output_tube.empty()) write_tube(cfg.paths.output_tube, clean);
            auto noisy = inverse::add_noise(result.tube, cfg.noise.delta, cfg.noise.seed,
                                            static_cast<std::size_t>(cfg.geometry.boundary_vertices));
            noisy.source = "forward+noise";
            if (!cfg.paths.noisy_tube.empty()) write_tube(cfg.paths.noisy_tube, noisy);

            const double um0 = fparams.schedule.values().front();
            const auto iparams = inverse_params(cfg, um0);
            const auto rec = inverse::reconstruct_schedule(noisy, iparams);
            if (!cfg.paths.output_schedule.empty()) write_schedule(cfg.paths.output_schedule, rec.schedule);

            const auto cmp = compare_schedules(rec.schedule, fparams.schedule);
            Json report = {
                {"delta", cfg.noise.delta},
                {"seed", cfg.noise.seed},
                {"steps", rec.schedule.steps()},
                {"um0", iparams.um0},
                {"max_error_um", cmp.max_error_um},
                {"l2_error_um", cmp.l2_error_um},
                {"relative_l2_error_um", cmp.relative_l2_error_um},
                {"max_error_dum", cmp.max_error_rate},
                {"l2_error_dum", cmp.l2_error_rate},
                {"relative_l2_error_dum", cmp.relative_l2_error_rate},
                {"max_residual", *std::max_element(rec.residuals.begin(), rec.residuals.end())},
            };
            write_atomic(cfg.paths.report, report.dump(2) + "\n");
            log << "relative L2 error: u_m " << cmp.relative_l2_error_um << ", du_m "
                << cmp.relative_l2_error_rate << '\n';
            if (!cfg.paths.plots.empty()) {
                export_plot_data(cfg.paths.plots, noisy.tube,
                                 static_cast<std::size_t>(cfg.geometry.boundary_vertices),
                                 {{"truth", fparams.schedule}, {"reconstructed", rec.schedule}});
            }
            return 0;
        }
    }
    return 1;
}

} // namespace stefan::io
