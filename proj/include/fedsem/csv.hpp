#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace fedsem {

// Shortest round-trippable decimal form of a double.
std::string format_double(double v);

std::vector<std::string> split_csv_line(const std::string& line);

// Minimal CSV writer, LF line endings. Values are written verbatim; callers
// keep cells free of commas/quotes.
class CsvWriter {
public:
    explicit CsvWriter(const std::string& path);
    void row(const std::vector<std::string>& cells);
    void raw_line(const std::string& line);

private:
    std::ofstream out_;
};

std::vector<std::vector<std::string>> read_csv(const std::string& path);

}  // namespace fedsem
