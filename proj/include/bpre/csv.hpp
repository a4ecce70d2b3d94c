#pragma once

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

namespace bpre {

// CSV with a fixed header row; doubles are written with 17 significant
// digits so reruns compare byte-for-byte.
class CsvWriter {
public:
    CsvWriter(std::ostream& out, const std::vector<std::string>& header) : out_(out) {
        for (std::size_t i = 0; i < header.size(); ++i)
            out_ << (i ? "," : "") << header[i];
        out_ << "\n";
    }

    CsvWriter& field(double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        sep();
        out_ << buf;
        return *this;
    }
    CsvWriter& field(long long v) {
        sep();
        out_ << v;
        return *this;
    }
    CsvWriter& field(int v) { return field(static_cast<long long>(v)); }
    CsvWriter& field(const std::string& v) {
        sep();
        out_ << v;
        return *this;
    }
    void end_row() {
        out_ << "\n";
        first_ = true;
    }

private:
    void sep() {
        if (!first_) out_ << ",";
        first_ = false;
    }
    std::ostream& out_;
    bool first_ = true;
};

}  // namespace bpre
