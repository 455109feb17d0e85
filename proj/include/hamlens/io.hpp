// CSV artifact writing with pinned numeric formatting.
#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace hamlens {
namespace io {

// 17 significant digits; the stable on-disk form for every floating value.
std::string fmt(double v);

// RFC-style quoting: quote fields holding separators or quotes, double
// embedded quotes.
std::string csv_escape(const std::string& field);

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path);

    void comment(const std::string& line);
    void header(const std::vector<std::string>& names);
    void row(const std::vector<std::string>& fields);

private:
    void write_line(const std::vector<std::string>& fields);
    std::ofstream out_;
};

} // namespace io
} // namespace hamlens
