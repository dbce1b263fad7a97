#include "artifacts.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <unistd.h>

namespace lcsync::cli {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 520.0;
constexpr double kLeft = 64.0;
constexpr double kRight = 24.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 52.0;

std::string escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string fixed(double v, int digits = 2)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

std::string fnv1a_hex(const std::string& text)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string num(double v)
{
    if (!std::isfinite(v)) {
        return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
    }
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

void write_atomic(const std::filesystem::path& path, const std::string& content)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) {
            throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        }
        os << content;
        os.flush();
        if (!os) {
            throw std::runtime_error("write to " + tmp.string() + " failed");
        }
    }
    std::filesystem::rename(tmp, path);
}

CsvTable::CsvTable(const RunHeader& header, std::vector<std::string> columns) : width_(columns.size())
{
    text_ += "# lcsync " + header.command + "\n";
    text_ += "# config_hash " + header.config_hash + "\n";
    text_ += "# tolerances " + header.tolerances.dump() + "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) {
        text_ += (i ? "," : "") + columns[i];
    }
    text_ += "\n";
}

void CsvTable::row(const std::vector<std::string>& cells)
{
    if (cells.size() != width_) {
        throw std::logic_error("csv row width mismatch");
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
        text_ += (i ? "," : "") + cells[i];
    }
    text_ += "\n";
}

ordered_json json_document(const RunHeader& header, ordered_json body)
{
    ordered_json doc;
    doc["header"] = {{"tool", "lcsync"},
                     {"command", header.command},
                     {"config_hash", header.config_hash},
                     {"tolerances", header.tolerances}};
    for (auto it = body.begin(); it != body.end(); ++it) {
        doc[it.key()] = it.value();
    }
    return doc;
}

SvgPlot::SvgPlot(const RunHeader& header, Viewport view, std::string x_label, std::string y_label, std::string title)
    : header_(header), view_(view), x_label_(std::move(x_label)), y_label_(std::move(y_label)),
      title_(std::move(title))
{
    if (!(view_.x_hi > view_.x_lo) || !(view_.y_hi > view_.y_lo)) {
        throw std::invalid_argument("empty plot viewport");
    }
}

double SvgPlot::px(double x) const
{
    return kLeft + (x - view_.x_lo) / (view_.x_hi - view_.x_lo) * (kWidth - kLeft - kRight);
}

double SvgPlot::py(double y) const
{
    return kHeight - kBottom - (y - view_.y_lo) / (view_.y_hi - view_.y_lo) * (kHeight - kTop - kBottom);
}

void SvgPlot::polyline(const std::vector<std::pair<double, double>>& pts, const std::string& colour, double width,
                       const std::string& dash)
{
    if (pts.size() < 2) {
        return;
    }
    std::string d;
    bool pen = false;
    for (const auto& [x, y] : pts) {
        const bool inside = x >= view_.x_lo && x <= view_.x_hi && y >= view_.y_lo && y <= view_.y_hi;
        if (!inside) {
            pen = false;
            continue;
        }
        d += (pen ? " L" : " M") + fixed(px(x)) + "," + fixed(py(y));
        pen = true;
    }
    if (d.empty()) {
        return;
    }
    body_ += "<path d=\"" + d.substr(1) + "\" fill=\"none\" stroke=\"" + colour + "\" stroke-width=\"" +
             fixed(width, 2) + "\"" + (dash.empty() ? "" : " stroke-dasharray=\"" + dash + "\"") + "/>\n";
}

void SvgPlot::vertical(double x, const std::string& colour, const std::string& dash)
{
    if (x < view_.x_lo || x > view_.x_hi) {
        return;
    }
    body_ += "<line x1=\"" + fixed(px(x)) + "\" y1=\"" + fixed(py(view_.y_lo)) + "\" x2=\"" + fixed(px(x)) +
             "\" y2=\"" + fixed(py(view_.y_hi)) + "\" stroke=\"" + colour + "\" stroke-dasharray=\"" + dash + "\"/>\n";
}

void SvgPlot::marker(double x, double y, const std::string& colour, double radius)
{
    body_ += "<circle cx=\"" + fixed(px(x)) + "\" cy=\"" + fixed(py(y)) + "\" r=\"" + fixed(radius) + "\" fill=\"" +
             colour + "\"/>\n";
}

void SvgPlot::rect(double x0, double y0, double x1, double y1, const std::string& fill)
{
    const double a = px(std::min(x0, x1)), b = py(std::max(y0, y1));
    body_ += "<rect x=\"" + fixed(a) + "\" y=\"" + fixed(b) + "\" width=\"" + fixed(std::abs(px(x1) - px(x0))) +
             "\" height=\"" + fixed(std::abs(py(y1) - py(y0))) + "\" fill=\"" + fill + "\"/>\n";
}

void SvgPlot::legend(const std::string& label, const std::string& colour, const std::string& dash)
{
    legend_.push_back({label, {colour, dash}});
}

std::string SvgPlot::str() const
{
    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<!-- lcsync " << header_.command << " config_hash " << header_.config_hash << " tolerances "
       << escape(header_.tolerances.dump()) << " -->\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
       << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(title_)
       << "</text>\n";
    // frame and ticks
    os << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kWidth - kLeft - kRight << "\" height=\""
       << kHeight - kTop - kBottom << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double x = view_.x_lo + (view_.x_hi - view_.x_lo) * i / 5.0;
        const double y = view_.y_lo + (view_.y_hi - view_.y_lo) * i / 5.0;
        os << "<line x1=\"" << fixed(px(x)) << "\" y1=\"" << fixed(kHeight - kBottom) << "\" x2=\"" << fixed(px(x))
           << "\" y2=\"" << fixed(kHeight - kBottom + 5) << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << fixed(px(x)) << "\" y=\"" << fixed(kHeight - kBottom + 18)
           << "\" text-anchor=\"middle\">" << fixed(x, 2) << "</text>\n";
        os << "<line x1=\"" << fixed(kLeft - 5) << "\" y1=\"" << fixed(py(y)) << "\" x2=\"" << fixed(kLeft)
           << "\" y2=\"" << fixed(py(y)) << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << fixed(kLeft - 8) << "\" y=\"" << fixed(py(y) + 4) << "\" text-anchor=\"end\">"
           << fixed(y, 2) << "</text>\n";
    }
    os << "<text x=\"" << fixed((kLeft + kWidth - kRight) / 2) << "\" y=\"" << fixed(kHeight - 12)
       << "\" text-anchor=\"middle\">" << escape(x_label_) << "</text>\n";
    os << "<text x=\"16\" y=\"" << fixed((kTop + kHeight - kBottom) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
       << fixed((kTop + kHeight - kBottom) / 2) << ")\">" << escape(y_label_) << "</text>\n";
    os << "<clipPath id=\"frame\"><rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\""
       << kWidth - kLeft - kRight << "\" height=\"" << kHeight - kTop - kBottom << "\"/></clipPath>\n";
    os << "<g clip-path=\"url(#frame)\">\n" << body_ << "</g>\n";
    double ly = kTop + 14;
    for (const auto& [label, style] : legend_) {
        const double lx = kWidth - kRight - 150;
        os << "<line x1=\"" << fixed(lx) << "\" y1=\"" << fixed(ly - 4) << "\" x2=\"" << fixed(lx + 24) << "\" y2=\""
           << fixed(ly - 4) << "\" stroke=\"" << style.first << "\" stroke-width=\"2\""
           << (style.second.empty() ? "" : " stroke-dasharray=\"" + style.second + "\"") << "/>\n";
        os << "<text x=\"" << fixed(lx + 30) << "\" y=\"" << fixed(ly) << "\">" << escape(label) << "</text>\n";
        ly += 16;
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace lcsync::cli
