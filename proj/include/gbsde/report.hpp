#pragma once

#include "gbsde/types.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace gbsde {

using OJson = nlohmann::ordered_json;

/// One verify/solve section: inputs, estimates, tolerances and named
/// assertions. Key order is fixed so reports are byte-identical across runs.
class ReportSection {
  public:
    explicit ReportSection(std::string name);

    void input(const std::string& key, const OJson& value);
    void estimate(const std::string& key, const OJson& value);
    void tolerance(const std::string& key, double value);
    void assertion(const std::string& name, bool pass, const std::string& detail = "");
    void warning(const std::string& text);

    bool all_passed() const { return all_passed_; }
    bool has_warnings() const;
    OJson json() const;
    const std::string& name() const { return name_; }

  private:
    std::string name_;
    OJson inputs_ = OJson::object();
    OJson estimates_ = OJson::object();
    OJson tolerances_ = OJson::object();
    OJson assertions_ = OJson::array();
    OJson warnings_ = OJson::array();
    bool all_passed_ = true;
};

class Report {
  public:
    Report(std::string command, uint64_t seed);

    ReportSection& section(const std::string& name);
    void attach_config(const OJson& config_echo);

    bool all_passed() const;
    bool has_warnings() const;
    OJson json() const;

    /// Serialized form written to disk: dump(2) plus a trailing newline.
    std::string render() const;
    void write(const std::filesystem::path& path) const;

    /// One line per assertion, pass/fail first.
    std::string summary() const;

  private:
    std::string command_;
    uint64_t seed_;
    OJson config_echo_ = OJson::object();
    std::vector<ReportSection> sections_;
};

/// Deterministic shortest round-trip formatting for CSV cells.
std::string format_double(double v);

class CsvWriter {
  public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
    void row(const std::vector<std::string>& cells);
    ~CsvWriter();

  private:
    std::ofstream out_;
    std::size_t columns_;
};

}  // namespace gbsde
