#pragma once

#include <string>
#include <vector>

#include "gb/quantiles.hpp"
#include "gb/survival.hpp"

namespace gb {

// Readers skip leading '#' comment lines; malformed cells are reported with
// their (1-based) row and column as ValidationError.

SurvivalDataset read_survival_csv(const std::string& path);  // time,event,x1..xp
GroupedSample read_grouped_csv(const std::string& path);     // group,value
std::vector<double> read_scalar_csv(const std::string& path);  // value

// Collects lines, then writes through a temp file renamed into place, so a
// failed run leaves no partial output.
class AtomicCsvWriter {
public:
    explicit AtomicCsvWriter(std::string path) : path_(std::move(path)) {}

    void comment(const std::string& line);  // "# " prefixed
    void row(const std::string& line);
    void commit();

private:
    std::string path_;
    std::vector<std::string> lines_;
};

// shortest round-trippable decimal representation
std::string format_double(double v);

}  // namespace gb
