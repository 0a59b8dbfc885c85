#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "chartlab/common.hpp"

namespace chartlab::runio {

// Provenance record embedded in every artifact a command writes.
struct RunManifest {
    std::string run_id;
    std::string command;
    nlohmann::json config;                              // full flag/config echo
    std::map<std::string, std::string> corpus_checksums;  // path -> hex digest
    std::string code_version{kVersion};
    std::string started_at;
    std::string finished_at;

    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);
};

std::string iso8601_now();
std::string file_checksum(const std::string& path);

void write_json_file(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::string& path);

// Trailing rolling mean: out[i] averages the last min(i+1, window) values.
std::vector<double> rolling_mean(const std::vector<double>& values, int window);

struct CurveSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

// Self-contained SVG line chart with axes and a legend.
void write_svg_chart(const std::string& path, const std::string& title,
                     const std::vector<CurveSeries>& series);

}  // namespace chartlab::runio
