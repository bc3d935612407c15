#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "cvtomo/errors.hpp"
#include "cvtomo/gaussian_state.hpp"

namespace cvtomo {

using json = nlohmann::json;

inline json vec_to_json(const Vec& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

// Row-major array of arrays.
inline json mat_to_json(const Mat& m) {
    json out = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        out.push_back(row);
    }
    return out;
}

inline Vec vec_from_json(const json& j, Eigen::Index expect) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != expect)
        throw io_error("vector field has wrong shape");
    Vec v(expect);
    for (Eigen::Index i = 0; i < expect; ++i) {
        if (!j[i].is_number()) throw io_error("vector entry is not a number");
        v(i) = j[i].get<double>();
        if (!std::isfinite(v(i))) throw io_error("vector entry is not finite");
    }
    return v;
}

inline Mat mat_from_json(const json& j, Eigen::Index rows, Eigen::Index cols) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
        throw io_error("matrix field has wrong number of rows");
    Mat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const json& row = j[r];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            throw io_error("matrix row has wrong length");
        for (Eigen::Index c = 0; c < cols; ++c) {
            if (!row[c].is_number()) throw io_error("matrix entry is not a number");
            m(r, c) = row[c].get<double>();
            if (!std::isfinite(m(r, c))) throw io_error("matrix entry is not finite");
        }
    }
    return m;
}

// Canonical on-disk state schema: {"n": int, "mean": [...], "cov": [[...]]}.
inline json state_to_json(const GaussianState& s) {
    return json{{"n", s.n}, {"mean", vec_to_json(s.m)}, {"cov", mat_to_json(s.V)}};
}

inline GaussianState state_from_json(const json& j) {
    if (!j.is_object() || !j.contains("n") || !j.contains("mean") || !j.contains("cov"))
        throw io_error("state object needs fields n, mean, cov");
    if (!j["n"].is_number_integer()) throw io_error("field n must be an integer");
    const int n = j["n"].get<int>();
    if (n < 1 || n > 64) throw io_error("mode count out of range");
    GaussianState s{n, vec_from_json(j["mean"], 2 * n),
                    mat_from_json(j["cov"], 2 * n, 2 * n)};
    return s;
}

inline GaussianState load_gaussian_state(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw io_error(path + ": " + e.what());
    }
    try {
        return state_from_json(j);
    } catch (const io_error& e) {
        throw io_error(path + ": " + e.what());
    }
}

inline void save_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
    if (!out) throw io_error("write to " + path + " failed");
}

inline void save_gaussian_state(const std::string& path, const GaussianState& s) {
    save_json(path, state_to_json(s));
}

}  // namespace cvtomo
