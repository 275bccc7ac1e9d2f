#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace metalearn::cli {

/// Shortest round-trip-safe rendering used in every CSV and JSON number, so
/// equal doubles always produce equal bytes.
std::string num(double v);

/// CSV with a `# schema=v1` first line and a fixed header.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

    template <typename... Cells>
    void row(const Cells&... cells) {
        std::vector<std::string> out;
        (out.push_back(cell(cells)), ...);
        write(out);
    }
    void write(const std::vector<std::string>& cells);

private:
    static std::string cell(const std::string& s) { return s; }
    static std::string cell(const char* s) { return s; }
    static std::string cell(double v) { return num(v); }
    static std::string cell(std::size_t v) { return std::to_string(v); }
    static std::string cell(int v) { return std::to_string(v); }
    static std::string cell(bool v) { return v ? "true" : "false"; }

    std::ofstream out_;
    std::size_t columns_;
};

void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& doc);

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

struct ChartOptions {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
};

/// Minimal static SVG line chart.
void write_svg_chart(const std::filesystem::path& path, const std::vector<Series>& series, const ChartOptions& opts);

}  // namespace metalearn::cli
