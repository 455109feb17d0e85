#include "hamlens/io.hpp"

#include <cstdio>

#include "hamlens/errors.hpp"

namespace hamlens {
namespace io {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

CsvWriter::CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) fail(ErrorCode::InvalidArgument, "cannot open for writing: " + path);
}

void CsvWriter::comment(const std::string& line) {
    out_ << "# " << line << "\n";
}

void CsvWriter::header(const std::vector<std::string>& names) {
    write_line(names);
}

void CsvWriter::row(const std::vector<std::string>& fields) {
    write_line(fields);
}

void CsvWriter::write_line(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out_ << ',';
        out_ << csv_escape(fields[i]);
    }
    out_ << '\n';
}

} // namespace io
} // namespace hamlens
