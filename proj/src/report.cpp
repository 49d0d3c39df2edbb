#include "gbsde/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace gbsde {

ReportSection::ReportSection(std::string name) : name_(std::move(name)) {}

void ReportSection::input(const std::string& key, const OJson& value) { inputs_[key] = value; }
void ReportSection::estimate(const std::string& key, const OJson& value) {
    estimates_[key] = value;
}
void ReportSection::tolerance(const std::string& key, double value) { tolerances_[key] = value; }

void ReportSection::assertion(const std::string& name, bool pass, const std::string& detail) {
    OJson a = OJson::object();
    a["name"] = name;
    a["pass"] = pass;
    if (!detail.empty()) a["detail"] = detail;
    assertions_.push_back(a);
    all_passed_ = all_passed_ && pass;
}

void ReportSection::warning(const std::string& text) { warnings_.push_back(text); }

bool ReportSection::has_warnings() const { return !warnings_.empty(); }

OJson ReportSection::json() const {
    OJson s = OJson::object();
    s["name"] = name_;
    s["inputs"] = inputs_;
    s["estimates"] = estimates_;
    s["tolerances"] = tolerances_;
    s["assertions"] = assertions_;
    s["warnings"] = warnings_;
    s["pass"] = all_passed_;
    return s;
}

Report::Report(std::string command, uint64_t seed) : command_(std::move(command)), seed_(seed) {}

ReportSection& Report::section(const std::string& name) {
    sections_.emplace_back(name);
    return sections_.back();
}

void Report::attach_config(const OJson& config_echo) { config_echo_ = config_echo; }

bool Report::all_passed() const {
    for (const auto& s : sections_)
        if (!s.all_passed()) return false;
    return true;
}

bool Report::has_warnings() const {
    for (const auto& s : sections_)
        if (s.has_warnings()) return true;
    return false;
}

OJson Report::json() const {
    OJson r = OJson::object();
    r["version"] = 1;
    r["command"] = command_;
    r["seed"] = seed_;
    r["config"] = config_echo_;
    r["sections"] = OJson::array();
    for (const auto& s : sections_) r["sections"].push_back(s.json());
    r["pass"] = all_passed();
    return r;
}

std::string Report::render() const { return json().dump(2) + "\n"; }

void Report::write(const std::filesystem::path& path) const {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write report to '" + path.string() + "'");
    out << render();
}

std::string Report::summary() const {
    std::ostringstream os;
    for (const auto& s : sections_) {
        OJson j = s.json();
        for (const auto& a : j["assertions"]) {
            os << (a["pass"].get<bool>() ? "[PASS] " : "[FAIL] ") << s.name() << ": "
               << a["name"].get<std::string>();
            if (a.contains("detail")) os << " (" << a["detail"].get<std::string>() << ")";
            os << "\n";
        }
        for (const auto& w : j["warnings"])
            os << "[WARN] " << s.name() << ": " << w.get<std::string>() << "\n";
    }
    os << (all_passed() ? "PASS" : "FAIL") << "\n";
    return os.str();
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : columns_(header.size()) {
    std::filesystem::create_directories(path.parent_path());
    out_.open(path, std::ios::binary);
    if (!out_) throw ConfigError("cannot write CSV to '" + path.string() + "'");
    for (std::size_t i = 0; i < header.size(); ++i)
        out_ << header[i] << (i + 1 < header.size() ? "," : "\n");
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) throw ShapeError("CsvWriter: column count mismatch");
    for (std::size_t i = 0; i < cells.size(); ++i)
        out_ << cells[i] << (i + 1 < cells.size() ? "," : "\n");
}

CsvWriter::~CsvWriter() = default;

}  // namespace gbsde
