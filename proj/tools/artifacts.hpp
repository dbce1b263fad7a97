#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace lcsync::cli {

using nlohmann::ordered_json;

/// Header shared by every artifact of one run.
struct RunHeader {
    std::string command;
    std::string config_hash;
    ordered_json tolerances;
};

std::string fnv1a_hex(const std::string& text);

/// Shortest round-trip decimal form, identical on every run.
std::string num(double v);

/// Writes to a temporary sibling and renames it over the target.
void write_atomic(const std::filesystem::path& path, const std::string& content);

class CsvTable {
public:
    CsvTable(const RunHeader& header, std::vector<std::string> columns);
    void row(const std::vector<std::string>& cells);
    std::string str() const { return text_; }

private:
    std::size_t width_;
    std::string text_;
};

ordered_json json_document(const RunHeader& header, ordered_json body);

struct Viewport {
    double x_lo, x_hi, y_lo, y_hi;
};

/// Minimal static plot: axes, polylines, markers and a legend.
class SvgPlot {
public:
    SvgPlot(const RunHeader& header, Viewport view, std::string x_label, std::string y_label, std::string title);

    void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& colour, double width = 1.0,
                  const std::string& dash = "");
    void vertical(double x, const std::string& colour, const std::string& dash = "4,3");
    void marker(double x, double y, const std::string& colour, double radius = 2.5);
    void rect(double x0, double y0, double x1, double y1, const std::string& fill);
    void legend(const std::string& label, const std::string& colour, const std::string& dash = "");
    std::string str() const;

private:
    double px(double x) const;
    double py(double y) const;

    RunHeader header_;
    Viewport view_;
    std::string x_label_, y_label_, title_;
    std::string body_;
    std::vector<std::pair<std::string, std::pair<std::string, std::string>>> legend_;
};

}  // namespace lcsync::cli
