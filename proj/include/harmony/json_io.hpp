#pragma once

// Row-major JSON encoding for Eigen vectors and matrices.

#include <Eigen/Dense>
#include "json.hpp"

#include "harmony/error.hpp"

#include <string>

namespace harmony::jsonio {

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v)
{
    return std::vector<double>(v.data(), v.data() + v.size());
}

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m)
{
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json r = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            r.push_back(m(i, j));
        rows.push_back(std::move(r));
    }
    return rows;
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j, Eigen::Index expected = -1)
{
    const auto v = j.get<std::vector<double>>();
    if (expected >= 0 && static_cast<Eigen::Index>(v.size()) != expected)
        throw ConfigError("expected vector of length " + std::to_string(expected) + ", got " + std::to_string(v.size()));
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols)
{
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
        throw ConfigError("expected matrix with " + std::to_string(rows) + " rows");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto r = j[static_cast<std::size_t>(i)].get<std::vector<double>>();
        if (static_cast<Eigen::Index>(r.size()) != cols)
            throw ConfigError("expected matrix with " + std::to_string(cols) + " columns");
        for (Eigen::Index k = 0; k < cols; ++k)
            m(i, k) = r[static_cast<std::size_t>(k)];
    }
    return m;
}

} // namespace harmony::jsonio
