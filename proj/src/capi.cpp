#define STEFAN_BUILDING_LIBRARY
#include "stefan/stefan.h"

#include "stefan/error.hpp"
#include "stefan/forward.hpp"
#include "stefan/inverse.hpp"
#include "stefan/io.hpp"

#include <iostream>
#include <new>
#include <sstream>
#include <string>

struct stefan_config {
    stefan::io::Json doc = stefan::io::Json::object();
};

struct stefan_tube {
    stefan::inverse::ObservedTube observed;
};

struct stefan_schedule {
    stefan::forward::MeltingSchedule schedule;
};

namespace {

thread_local std::string g_last_error;
thread_local int g_last_step = -1;

stefan_status code_for(stefan::ErrorKind kind) {
    using stefan::ErrorKind;
    switch (kind) {
        case ErrorKind::InvalidArgument: return STEFAN_ERR_INVALID_ARGUMENT;
        case ErrorKind::FoldedMesh: return STEFAN_ERR_FOLDED_MESH;
        case ErrorKind::NonPositiveRadius: return STEFAN_ERR_NONPOSITIVE_RADIUS;
        case ErrorKind::SolverFailure: return STEFAN_ERR_SOLVER;
        case ErrorKind::DegenerateSensitivity: return STEFAN_ERR_DEGENERATE_SENSITIVITY;
        case ErrorKind::Io: return STEFAN_ERR_IO;
        case ErrorKind::Config: return STEFAN_ERR_CONFIG;
    }
    return STEFAN_ERR_INTERNAL;
}

template <class F>
stefan_status guarded(F&& body) {
    g_last_error.clear();
    g_last_step = -1;
    try {
        body();
        return STEFAN_OK;
    } catch (const stefan::Error& e) {
        g_last_error = e.what();
        g_last_step = e.step();
        return code_for(e.kind());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
    } catch (const std::exception& e) {
        g_last_error = e.what();
    } catch (...) {
        g_last_error = "unknown error";
    }
    return STEFAN_ERR_INTERNAL;
}

void need(const void* p, const char* what) {
    if (p == nullptr) throw stefan::Error(stefan::ErrorKind::InvalidArgument, std::string(what) + " is null");
}

stefan::io::RunConfig parsed(const stefan_config* cfg) {
    need(cfg, "config");
    return stefan::io::parse_config(cfg->doc);
}

// Parsing with a mode that needs no paths, for library calls that only read settings.
stefan::io::RunConfig parsed_settings(const stefan_config* cfg, const char* mode) {
    need(cfg, "config");
    stefan::io::Json doc = cfg->doc;
    doc["mode"] = mode;
    doc.erase("paths");
    doc["paths"] = {{"report", "-"}, {"output_tube", "-"}, {"input_tube", "-"}, {"output_schedule", "-"}};
    return stefan::io::parse_config(doc);
}

} // namespace

extern "C" {

const char* stefan_version(void) { return "1.0.0"; }

const char* stefan_last_error(void) { return g_last_error.c_str(); }

int stefan_last_error_step(void) { return g_last_step; }

stefan_status stefan_config_new(stefan_config** out) {
    return guarded([&] {
        need(out, "out");
        *out = new stefan_config;
    });
}

stefan_status stefan_config_load(const char* path, stefan_config** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        auto cfg = std::make_unique<stefan_config>();
        cfg->doc = stefan::io::load_config_file(path);
        if (!cfg->doc.is_object()) throw stefan::Error(stefan::ErrorKind::Config, "config root must be an object");
        *out = cfg.release();
    });
}

stefan_status stefan_config_parse(const char* json_text, stefan_config** out) {
    return guarded([&] {
        need(json_text, "json_text");
        need(out, "out");
        auto cfg = std::make_unique<stefan_config>();
        try {
            cfg->doc = stefan::io::Json::parse(json_text);
        } catch (const stefan::io::Json::parse_error& e) {
            throw stefan::Error(stefan::ErrorKind::Config, e.what());
        }
        if (!cfg->doc.is_object()) throw stefan::Error(stefan::ErrorKind::Config, "config root must be an object");
        *out = cfg.release();
    });
}

void stefan_config_free(stefan_config* cfg) { delete cfg; }

stefan_status stefan_config_set_number(stefan_config* cfg, const char* key, double value) {
    return guarded([&] {
        need(cfg, "config");
        need(key, "key");
        stefan::io::set_config_value(cfg->doc, key, value);
    });
}

stefan_status stefan_config_set_integer(stefan_config* cfg, const char* key, int64_t value) {
    return guarded([&] {
        need(cfg, "config");
        need(key, "key");
        stefan::io::set_config_value(cfg->doc, key, value);
    });
}

stefan_status stefan_config_set_string(stefan_config* cfg, const char* key, const char* value) {
    return guarded([&] {
        need(cfg, "config");
        need(key, "key");
        need(value, "value");
        stefan::io::set_config_value(cfg->doc, key, std::string(value));
    });
}

stefan_status stefan_config_remove(stefan_config* cfg, const char* key) {
    return guarded([&] {
        need(cfg, "config");
        need(key, "key");
        std::string rest(key);
        stefan::io::Json* node = &cfg->doc;
        for (auto dot = rest.find('.'); dot != std::string::npos; dot = rest.find('.')) {
            const std::string part = rest.substr(0, dot);
            if (!node->is_object() || !node->contains(part)) return;
            node = &(*node)[part];
            rest = rest.substr(dot + 1);
        }
        if (node->is_object()) node->erase(rest);
    });
}

stefan_status stefan_config_validate(const stefan_config* cfg) {
    return guarded([&] { (void)parsed(cfg); });
}

stefan_status stefan_run(const stefan_config* cfg, int verbose) {
    return guarded([&] {
        const auto rc = parsed(cfg);
        std::ostringstream sink;
        std::ostream& log = verbose ? std::cerr : static_cast<std::ostream&>(sink);
        stefan::io::run(rc, log);
    });
}

stefan_status stefan_simulate(const stefan_config* cfg, stefan_tube** out) {
    return guarded([&] {
        need(out, "out");
        const auto rc = parsed_settings(cfg, "forward");
        auto result = stefan::forward::simulate_forward(stefan::io::forward_params(rc));
        *out = new stefan_tube{{std::move(result.tube), 0.0, rc.geometry.initial.seed, "forward"}};
    });
}

stefan_status stefan_tube_read(const char* path, stefan_tube** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = new stefan_tube{stefan::io::read_tube(path)};
    });
}

stefan_status stefan_tube_write(const stefan_tube* tube, const char* path) {
    return guarded([&] {
        need(tube, "tube");
        need(path, "path");
        stefan::io::write_tube(path, tube->observed);
    });
}

void stefan_tube_free(stefan_tube* tube) { delete tube; }

stefan_status stefan_tube_size(const stefan_tube* tube, size_t* records) {
    return guarded([&] {
        need(tube, "tube");
        need(records, "records");
        *records = tube->observed.tube.records.size();
    });
}

stefan_status stefan_tube_order(const stefan_tube* tube, int* order) {
    return guarded([&] {
        need(tube, "tube");
        need(order, "order");
        *order = tube->observed.tube.order;
    });
}

stefan_status stefan_tube_dt(const stefan_tube* tube, double* dt) {
    return guarded([&] {
        need(tube, "tube");
        need(dt, "dt");
        *dt = tube->observed.tube.dt;
    });
}

stefan_status stefan_tube_record(const stefan_tube* tube, size_t k, double* time, double* coeffs,
                                 size_t capacity) {
    return guarded([&] {
        need(tube, "tube");
        const auto& records = tube->observed.tube.records;
        stefan::require(k < records.size(), "record index out of range");
        const auto& rec = records[k];
        if (time) *time = rec.time;
        if (coeffs) {
            stefan::require(capacity >= rec.boundary.size(), "coefficient buffer too small");
            const auto c = rec.boundary.coeffs();
            std::copy(c.begin(), c.end(), coeffs);
        }
    });
}

stefan_status stefan_tube_radius(const stefan_tube* tube, size_t k, double phi, double* radius) {
    return guarded([&] {
        need(tube, "tube");
        need(radius, "radius");
        const auto& records = tube->observed.tube.records;
        stefan::require(k < records.size(), "record index out of range");
        *radius = records[k].boundary.radius(phi);
    });
}

stefan_status stefan_tube_perturb(const stefan_tube* tube, double delta, uint64_t seed, size_t samples,
                                  stefan_tube** out) {
    return guarded([&] {
        need(tube, "tube");
        need(out, "out");
        stefan::require(samples > 0, "samples must be positive");
        auto noisy = stefan::inverse::add_noise(tube->observed.tube, delta, seed, samples);
        noisy.source = tube->observed.source;
        *out = new stefan_tube{std::move(noisy)};
    });
}

stefan_status stefan_reconstruct(const stefan_tube* tube, const stefan_config* cfg, stefan_schedule** out) {
    return guarded([&] {
        need(tube, "tube");
        need(out, "out");
        const auto rc = parsed_settings(cfg, "invert");
        const auto params = stefan::io::inverse_params(rc, 0.0);
        auto rec = stefan::inverse::reconstruct_schedule(tube->observed, params);
        *out = new stefan_schedule{std::move(rec.schedule)};
    });
}

stefan_status stefan_schedule_read(const char* path, stefan_schedule** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = new stefan_schedule{stefan::io::read_schedule(path)};
    });
}

stefan_status stefan_schedule_write(const stefan_schedule* schedule, const char* path) {
    return guarded([&] {
        need(schedule, "schedule");
        need(path, "path");
        stefan::io::write_schedule(path, schedule->schedule);
    });
}

void stefan_schedule_free(stefan_schedule* schedule) { delete schedule; }

stefan_status stefan_schedule_steps(const stefan_schedule* schedule, size_t* steps) {
    return guarded([&] {
        need(schedule, "schedule");
        need(steps, "steps");
        *steps = schedule->schedule.slopes().size();
    });
}

stefan_status stefan_schedule_dt(const stefan_schedule* schedule, double* dt) {
    return guarded([&] {
        need(schedule, "schedule");
        need(dt, "dt");
        *dt = schedule->schedule.dt();
    });
}

stefan_status stefan_schedule_values(const stefan_schedule* schedule, double* values, size_t capacity) {
    return guarded([&] {
        need(schedule, "schedule");
        need(values, "values");
        const auto& v = schedule->schedule.values();
        stefan::require(capacity >= v.size(), "value buffer too small");
        std::copy(v.begin(), v.end(), values);
    });
}

stefan_status stefan_schedule_slopes(const stefan_schedule* schedule, double* slopes, size_t capacity) {
    return guarded([&] {
        need(schedule, "schedule");
        need(slopes, "slopes");
        const auto& s = schedule->schedule.slopes();
        stefan::require(capacity >= s.size(), "slope buffer too small");
        std::copy(s.begin(), s.end(), slopes);
    });
}

} // extern "C"
