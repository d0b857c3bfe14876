#pragma once

#include <cstddef>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "kelly/model.hpp"
#include "kelly/simulate.hpp"

namespace kelly {

/// Configuration problem (bad file, bad JSON, bad schema). The CLI maps
/// these to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::pair<std::size_t, std::size_t> line_column_of(const std::string& text,
                                                          std::size_t byte) {
    std::size_t line = 1, column = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return {line, column};
}

}  // namespace detail

/// Parse a universe config document:
///   {"assets":[{"name":"a1","m":0.1,"D":0.04},...],"covariance":[[...],...]}
/// (covariance optional).
inline AssetUniverse parse_universe_json(const std::string& text,
                                         const std::string& origin = "universe config") {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        const auto [line, column] = detail::line_column_of(text, e.byte > 0 ? e.byte - 1 : 0);
        throw ConfigError(origin + ": parse error at line " + std::to_string(line) + ", column " +
                          std::to_string(column) + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("assets") || !doc["assets"].is_array())
        throw ConfigError(origin + ": expected an object with an \"assets\" array");
    std::vector<Asset> assets;
    for (std::size_t i = 0; i < doc["assets"].size(); ++i) {
        const auto& item = doc["assets"][i];
        if (!item.is_object() || !item.contains("m") || !item.contains("D") ||
            !item["m"].is_number() || !item["D"].is_number())
            throw ConfigError(origin + ": asset " + std::to_string(i) +
                              " needs numeric fields \"m\" and \"D\"");
        Asset a;
        a.name = item.value("name", "a" + std::to_string(i + 1));
        a.m = item["m"].get<double>();
        a.D = item["D"].get<double>();
        assets.push_back(std::move(a));
    }
    try {
        if (doc.contains("covariance")) {
            const auto& rows = doc["covariance"];
            if (!rows.is_array()) throw ConfigError(origin + ": \"covariance\" must be an array");
            const auto n = static_cast<Eigen::Index>(assets.size());
            Eigen::MatrixXd cov(n, n);
            if (static_cast<Eigen::Index>(rows.size()) != n)
                throw ConfigError(origin + ": covariance must be n x n");
            for (Eigen::Index i = 0; i < n; ++i) {
                const auto& row = rows[static_cast<std::size_t>(i)];
                if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n)
                    throw ConfigError(origin + ": covariance must be n x n");
                for (Eigen::Index j = 0; j < n; ++j)
                    cov(i, j) = row[static_cast<std::size_t>(j)].get<double>();
            }
            return AssetUniverse(std::move(assets), std::move(cov));
        }
        return AssetUniverse(std::move(assets));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(origin + ": " + e.what());
    }
}

inline AssetUniverse load_universe(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open universe config: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_universe_json(buffer.str(), path);
}

inline nlohmann::ordered_json universe_to_json(const AssetUniverse& universe) {
    nlohmann::ordered_json doc;
    doc["assets"] = nlohmann::ordered_json::array();
    for (const Asset& a : universe.assets())
        doc["assets"].push_back({{"name", a.name}, {"m", a.m}, {"D", a.D}});
    if (universe.has_covariance()) {
        const Eigen::MatrixXd& s = universe.covariance();
        auto rows = nlohmann::ordered_json::array();
        for (Eigen::Index i = 0; i < s.rows(); ++i) {
            auto row = nlohmann::ordered_json::array();
            for (Eigen::Index j = 0; j < s.cols(); ++j) row.push_back(s(i, j));
            rows.push_back(std::move(row));
        }
        doc["covariance"] = std::move(rows);
    }
    return doc;
}

/// Numbers in CSV output carry 12 significant digits, enough to round-trip
/// the plotted values.
inline std::string format_number(double value, int significant_digits = 12) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.*g", significant_digits, value);
    return buffer;
}

/// Comma-separated output with a header row and '.' decimal marks.
class CsvWriter {
public:
    explicit CsvWriter(std::ostream& out) : out_(out) {}

    void header(const std::vector<std::string>& columns) { write_row(columns); }

    template <typename... Cells>
    void row(const Cells&... cells) {
        bool first = true;
        (write_cell(cells, first), ...);
        out_ << '\n';
    }

    void write_row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

private:
    void write_cell(double value, bool& first) {
        if (!first) out_ << ',';
        first = false;
        out_ << format_number(value);
    }
    void write_cell(int value, bool& first) {
        if (!first) out_ << ',';
        first = false;
        out_ << value;
    }
    void write_cell(std::size_t value, bool& first) {
        if (!first) out_ << ',';
        first = false;
        out_ << value;
    }
    void write_cell(std::string_view value, bool& first) {
        if (!first) out_ << ',';
        first = false;
        out_ << value;
    }
    void write_cell(const std::string& value, bool& first) {
        write_cell(std::string_view(value), first);
    }
    void write_cell(const char* value, bool& first) { write_cell(std::string_view(value), first); }

    std::ostream& out_;
};

inline void write_paths_csv(const PricePaths& paths, std::ostream& out) {
    CsvWriter csv(out);
    csv.header({"path", "t", "asset", "price"});
    for (std::size_t p = 0; p < paths.n_paths; ++p)
        for (std::size_t t = 0; t <= paths.horizon; ++t)
            for (std::size_t a = 0; a < paths.n_assets; ++a)
                csv.row(p, t, a, paths.price(p, t, a));
}

}  // namespace kelly
