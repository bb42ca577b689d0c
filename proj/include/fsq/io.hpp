#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fsq/grid.hpp"

namespace fsq {

/// CSV writer with deterministic float formatting (%.17g), so reruns with
/// the same seed hash identically.
class CsvWriter {
  public:
    explicit CsvWriter(std::vector<std::string> columns) : cols_(std::move(columns)) {
        for (size_t i = 0; i < cols_.size(); ++i) {
            if (i) body_ += ",";
            body_ += cols_[i];
        }
        body_ += "\n";
    }

    void row(const std::vector<double>& vals) {
        char buf[64];
        for (size_t i = 0; i < vals.size(); ++i) {
            if (i) body_ += ",";
            std::snprintf(buf, sizeof(buf), "%.17g", vals[i]);
            body_ += buf;
        }
        body_ += "\n";
    }

    void row_mixed(const std::vector<std::string>& vals) {
        for (size_t i = 0; i < vals.size(); ++i) {
            if (i) body_ += ",";
            body_ += vals[i];
        }
        body_ += "\n";
    }

    const std::string& str() const { return body_; }
    std::uint64_t hash() const { return fnv1a(body_); }

    void write(const std::string& path) const {
        std::ofstream out(path);
        out << body_;
    }

  private:
    std::vector<std::string> cols_;
    std::string body_;
};

/// Flat binary dump of a complex lattice with a JSON sidecar describing the
/// grid and provenance.
inline void dump_field(const Field& f, const std::string& path, nlohmann::json extra = {}) {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(f.data.data()),
              std::streamsize(sizeof(cplx) * size_t(f.data.size())));
    nlohmann::json j = extra;
    j["schema"] = "fsq.field.v1";
    j["nx"] = f.grid.nx;
    j["nt"] = f.grid.nt;
    j["t0"] = f.grid.t0;
    j["dt"] = f.grid.dt;
    j["dtype"] = "complex128";
    j["hash"] = fnv1a(f.data);
    std::ofstream side(path + ".json");
    side << j.dump(2) << "\n";
}

inline void write_json(const nlohmann::json& j, const std::string& path) {
    std::ofstream out(path);
    out << j.dump(2) << "\n";
}

inline void ensure_dir(const std::string& dir) { std::filesystem::create_directories(dir); }

}  // namespace fsq
