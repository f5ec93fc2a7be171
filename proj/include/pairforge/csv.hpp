#pragma once

// Minimal CSV writing/reading for the export formats. Numbers are written
// with %.12g so identical values always serialize to identical bytes.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pairforge/errors.hpp"

namespace pairforge {

class CsvWriter {
  public:
    explicit CsvWriter(std::vector<std::string> header)
        : header_(std::move(header)) {}

    void add_row(const std::vector<double>& row) {
        if (row.size() != header_.size())
            throw SchemaError("csv row width does not match header");
        rows_.push_back(row);
    }

    std::string str() const {
        std::string out;
        for (std::size_t i = 0; i < header_.size(); ++i) {
            if (i) out += ',';
            out += header_[i];
        }
        out += '\n';
        char buf[40];
        for (const auto& row : rows_) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                if (i) out += ',';
                std::snprintf(buf, sizeof buf, "%.12g", row[i]);
                out += buf;
            }
            out += '\n';
        }
        return out;
    }

    void write(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw SchemaError("cannot open output file: " + path);
        f << str();
    }

  private:
    std::vector<std::string> header_;
    std::vector<std::vector<double>> rows_;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    int column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        throw SchemaError("csv column not found: " + name);
    }
};

inline CsvTable read_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw SchemaError("cannot open csv file: " + path);
    CsvTable t;
    std::string line;
    bool first = true;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        if (first) {
            while (std::getline(ss, cell, ',')) t.header.push_back(cell);
            first = false;
            continue;
        }
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw SchemaError("csv numeric parse failure in " + path + ": '" +
                                  cell + "'");
            }
        }
        if (row.size() != t.header.size())
            throw SchemaError("csv row width mismatch in " + path);
        t.rows.push_back(std::move(row));
    }
    if (t.header.empty()) throw SchemaError("csv file has no header: " + path);
    return t;
}

}  // namespace pairforge
