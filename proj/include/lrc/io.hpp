#pragma once

#include <zlib.h>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lrc/block_matrix.hpp"
#include "lrc/causal_factorization.hpp"
#include "lrc/errors.hpp"
#include "lrc/problem.hpp"
#include "lrc/simulate.hpp"
#include "lrc/synthesis.hpp"
#include "lrc/types.hpp"

namespace lrc {

using Json = nlohmann::json;

namespace io_detail {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write file: " + path);
    out << content;
    if (!out) throw Error("write failed: " + path);
}

inline Json parse_text(const std::string& text, const std::string& what) {
    try {
        return Json::parse(text);
    } catch (const Json::exception& e) {
        throw ParseError(what + ": " + e.what());
    }
}

inline const Json& field(const Json& j, const char* key, const std::string& what) {
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(what + ": missing field '" + key + "'");
    return *it;
}

// Fixed-width double formatting for CSV rows: 17 significant digits survive
// a decimal round trip exactly.
inline std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

}  // namespace io_detail

inline Json matrix_to_json(const Matrix& M) {
    Json rows = Json::array();
    for (Index i = 0; i < M.rows(); ++i) {
        Json row = Json::array();
        for (Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const Json& j, const std::string& what) {
    if (!j.is_array()) throw ParseError(what + ": expected an array of rows");
    const auto r = static_cast<Index>(j.size());
    if (r == 0) return Matrix(0, 0);
    if (!j[0].is_array()) throw ParseError(what + ": expected rows to be arrays");
    const auto c = static_cast<Index>(j[0].size());
    Matrix M(r, c);
    for (Index i = 0; i < r; ++i) {
        if (!j[static_cast<size_t>(i)].is_array() || static_cast<Index>(j[static_cast<size_t>(i)].size()) != c) {
            throw ParseError(what + ": ragged rows");
        }
        for (Index k = 0; k < c; ++k) {
            const auto& cell = j[static_cast<size_t>(i)][static_cast<size_t>(k)];
            if (!cell.is_number()) throw ParseError(what + ": non-numeric entry");
            M(i, k) = cell.get<double>();
        }
    }
    return M;
}

inline Json vector_to_json(const Vector& v) {
    Json a = Json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline Vector vector_from_json(const Json& j, const std::string& what) {
    if (!j.is_array()) throw ParseError(what + ": expected an array");
    Vector v(static_cast<Index>(j.size()));
    for (Index i = 0; i < v.size(); ++i) {
        const auto& cell = j[static_cast<size_t>(i)];
        if (!cell.is_number()) throw ParseError(what + ": non-numeric entry");
        v(i) = cell.get<double>();
    }
    return v;
}

inline Json set_to_json(const HPolytope& p) {
    if (p.is_box()) {
        return Json{{"box", Json{{"lower", vector_to_json(p.box().lower)}, {"upper", vector_to_json(p.box().upper)}}}};
    }
    return Json{{"H", matrix_to_json(p.H)}, {"h", vector_to_json(p.h)}};
}

inline HPolytope set_from_json(const Json& j, const std::string& what) {
    if (!j.is_object()) throw ParseError(what + ": expected a set object");
    if (j.contains("box")) {
        const Json& b = j["box"];
        return HPolytope::from_box(Box(vector_from_json(io_detail::field(b, "lower", what), what),
                                       vector_from_json(io_detail::field(b, "upper", what), what)));
    }
    if (j.contains("H") && j.contains("h")) {
        return HPolytope(matrix_from_json(j["H"], what), vector_from_json(j["h"], what));
    }
    throw ParseError(what + ": set must be {box: {lower, upper}} or {H, h}");
}

// Problem files: versioned JSON with `horizon`, `dims`, `dynamics`, and
// `constraints`.  Dynamics entries and per-time constraint sets accept a
// broadcast shorthand (one matrix or set reused for every step) besides the
// explicit per-step list; saving always writes explicit lists.
inline Json problem_to_json(const SynthesisProblem& p) {
    Json j;
    j["format"] = 1;
    j["horizon"] = p.system.T;
    j["dims"] = Json{{"n_x", p.system.n_x}, {"n_u", p.system.n_u}, {"n_y", p.system.n_y}};
    auto seq = [](const std::vector<Matrix>& ms) {
        Json a = Json::array();
        for (const auto& m : ms) a.push_back(matrix_to_json(m));
        return a;
    };
    j["dynamics"] = Json{{"A", seq(p.system.A)}, {"B", seq(p.system.B)}, {"C", seq(p.system.C)}};
    auto sets = [](const std::vector<HPolytope>& ps) {
        Json a = Json::array();
        for (const auto& s : ps) a.push_back(set_to_json(s));
        return a;
    };
    j["constraints"] = Json{{"X0", set_to_json(p.safety.X0)},
                            {"X", sets(p.safety.X)},
                            {"U", sets(p.safety.U)},
                            {"W", sets(p.safety.W)},
                            {"V", sets(p.safety.V)}};
    j["objective"] = objective_name(p.objective);
    j["options"] = Json{{"delta", p.options.delta},
                        {"epsilon", p.options.epsilon},
                        {"max_reweight_iters", p.options.max_reweight_iters},
                        {"feasibility_tol", p.options.feasibility_tol},
                        {"seed", p.options.seed},
                        {"conic_eps", p.options.conic_eps},
                        {"conic_max_iters", p.options.conic_max_iters},
                        {"warm_start", p.options.warm_start},
                        {"safety_margin", p.options.safety_margin}};
    return j;
}

inline SynthesisProblem problem_from_json(const Json& j) {
    const std::string what = "problem";
    if (!j.is_object()) throw ParseError("problem: expected a JSON object");
    const auto& fmt = io_detail::field(j, "format", what);
    if (!fmt.is_number_integer() || fmt.get<int>() != 1) throw ParseError("problem: unsupported format version");

    SynthesisProblem p;
    const auto& horizon = io_detail::field(j, "horizon", what);
    if (!horizon.is_number_integer()) throw ParseError("problem: horizon must be an integer");
    p.system.T = horizon.get<int>();
    const Json& dims = io_detail::field(j, "dims", what);
    p.system.n_x = io_detail::field(dims, "n_x", what).get<Index>();
    p.system.n_u = io_detail::field(dims, "n_u", what).get<Index>();
    p.system.n_y = io_detail::field(dims, "n_y", what).get<Index>();

    const Json& dyn = io_detail::field(j, "dynamics", what);
    auto matrices = [&](const char* key, int count) {
        const Json& entry = io_detail::field(dyn, key, what);
        std::vector<Matrix> out;
        if (entry.is_array() && !entry.empty() && entry[0].is_array() && !entry[0].empty() && entry[0][0].is_array()) {
            for (const auto& m : entry) out.push_back(matrix_from_json(m, std::string("problem: ") + key));
        } else {
            const Matrix m = matrix_from_json(entry, std::string("problem: ") + key);
            out.assign(static_cast<size_t>(count), m);
        }
        return out;
    };
    p.system.A = matrices("A", p.system.T);
    p.system.B = matrices("B", p.system.T);
    p.system.C = matrices("C", p.system.T + 1);

    const Json& cons = io_detail::field(j, "constraints", what);
    p.safety.X0 = set_from_json(io_detail::field(cons, "X0", what), "problem: X0");
    auto set_seq = [&](const char* key, int count) {
        const Json& entry = io_detail::field(cons, key, what);
        std::vector<HPolytope> out;
        if (entry.is_array()) {
            for (const auto& s : entry) out.push_back(set_from_json(s, std::string("problem: ") + key));
        } else {
            const HPolytope s = set_from_json(entry, std::string("problem: ") + key);
            out.assign(static_cast<size_t>(count), s);
        }
        return out;
    };
    p.safety.X = set_seq("X", p.system.T);
    p.safety.U = set_seq("U", p.system.T);
    p.safety.W = set_seq("W", p.system.T);
    p.safety.V = set_seq("V", p.system.T);

    if (j.contains("objective")) {
        const std::string name = j["objective"].get<std::string>();
        if (name == "rank") p.objective = Objective::MessageRank;
        else if (name == "sensor") p.objective = Objective::SensorNorm;
        else if (name == "actuator") p.objective = Objective::ActuatorNorm;
        else if (name == "multipair") p.objective = Objective::MultiPairRank;
        else throw ParseError("problem: unknown objective '" + name + "'");
    }
    if (j.contains("options")) {
        const Json& o = j["options"];
        if (o.contains("delta")) p.options.delta = o["delta"].get<double>();
        if (o.contains("epsilon")) p.options.epsilon = o["epsilon"].get<double>();
        if (o.contains("max_reweight_iters")) p.options.max_reweight_iters = o["max_reweight_iters"].get<int>();
        if (o.contains("feasibility_tol")) p.options.feasibility_tol = o["feasibility_tol"].get<double>();
        if (o.contains("seed")) p.options.seed = o["seed"].get<std::uint64_t>();
        if (o.contains("conic_eps")) p.options.conic_eps = o["conic_eps"].get<double>();
        if (o.contains("conic_max_iters")) p.options.conic_max_iters = o["conic_max_iters"].get<int>();
        if (o.contains("warm_start")) p.options.warm_start = o["warm_start"].get<bool>();
        if (o.contains("safety_margin")) p.options.safety_margin = o["safety_margin"].get<double>();
    }

    p.system.validate();
    p.safety.validate(p.system);
    p.options.validate();
    return p;
}

inline void save_problem(const SynthesisProblem& p, const std::string& path) {
    io_detail::write_file(path, problem_to_json(p).dump(2) + "\n");
}

inline SynthesisProblem load_problem(const std::string& path) {
    return problem_from_json(io_detail::parse_text(io_detail::read_file(path), "problem file " + path));
}

// Gain files: the block grid plus the dense matrix.
inline Json gain_to_json(const BlockLowerTriangular& K) {
    return Json{{"block_rows", K.m}, {"block_cols", K.n}, {"horizon", K.T}, {"data", matrix_to_json(K.data)}};
}

inline BlockLowerTriangular gain_from_json(const Json& j) {
    const std::string what = "gain";
    const auto m = io_detail::field(j, "block_rows", what).get<Index>();
    const auto n = io_detail::field(j, "block_cols", what).get<Index>();
    Matrix data = matrix_from_json(io_detail::field(j, "data", what), what);
    BlockLowerTriangular K(std::move(data), m, n);
    if (j.contains("horizon") && j["horizon"].get<int>() != K.T) throw ParseError("gain: horizon does not match data");
    return K;
}

inline void save_gain(const BlockLowerTriangular& K, const std::string& path) {
    io_detail::write_file(path, gain_to_json(K).dump(2) + "\n");
}

inline BlockLowerTriangular load_gain(const std::string& path) {
    return gain_from_json(io_detail::parse_text(io_detail::read_file(path), "gain file " + path));
}

// Factorization files: the encoder/decoder pair with its schedule.
inline Json factorization_to_json(const CausalFactorization& f) {
    return Json{{"band", f.band},       {"times", f.times},          {"block_rows", f.n_u},
                {"block_cols", f.n_y},  {"D", matrix_to_json(f.D)},  {"E", matrix_to_json(f.E)}};
}

inline CausalFactorization factorization_from_json(const Json& j, int horizon_hint = -1) {
    const std::string what = "factorization";
    CausalFactorization f;
    f.band = io_detail::field(j, "band", what).get<int>();
    f.times = io_detail::field(j, "times", what).get<std::vector<int>>();
    f.n_u = io_detail::field(j, "block_rows", what).get<Index>();
    f.n_y = io_detail::field(j, "block_cols", what).get<Index>();
    f.D = matrix_from_json(io_detail::field(j, "D", what), what + ": D");
    f.E = matrix_from_json(io_detail::field(j, "E", what), what + ": E");
    if (f.band < 0 || static_cast<int>(f.times.size()) != f.band) throw ParseError("factorization: schedule length mismatch");
    // A band of zero drops all shape information from the empty matrices;
    // restore it from the horizon hint when one is available.
    if (f.band == 0 && horizon_hint >= 0) {
        f.D = Matrix::Zero((horizon_hint + 1) * f.n_u, 0);
        f.E = Matrix::Zero(0, (horizon_hint + 1) * f.n_y);
    }
    if (f.D.cols() != f.band || f.E.rows() != f.band) throw ParseError("factorization: band does not match factors");
    return f;
}

inline void save_factorization(const CausalFactorization& f, const std::string& path) {
    io_detail::write_file(path, factorization_to_json(f).dump(2) + "\n");
}

inline CausalFactorization load_factorization(const std::string& path, int horizon_hint = -1) {
    return factorization_from_json(io_detail::parse_text(io_detail::read_file(path), "factorization file " + path),
                                   horizon_hint);
}

// Synthesis report: everything downstream tooling needs, and nothing that
// varies between identical reruns (wall time is reported on the console
// only).
inline Json result_to_json(const SynthesisResult& r) {
    Json j;
    j["objective"] = objective_name(r.objective);
    j["message_count"] = r.message_count;
    j["solver_status"] = to_string(r.solver_status);
    j["reweight_iterations"] = r.reweight_iterations;
    j["conic_iterations"] = r.conic_iterations;
    j["eq_residual"] = r.eq_residual;
    j["ineq_violation"] = r.ineq_violation;
    j["singular_values"] = vector_to_json(r.singular_values);
    j["objective_trace"] = r.objective_trace;
    if (!r.group_norms.empty()) j["group_norms"] = r.group_norms;
    if (!r.pair_ranks.empty()) j["pair_ranks"] = r.pair_ranks;
    j["certificate_min_entry"] = r.certificate.min_entry();
    return j;
}

inline void save_result(const SynthesisResult& r, const std::string& path) {
    io_detail::write_file(path, result_to_json(r).dump(2) + "\n");
}

// Plot-data CSVs: one indexed value per row.
inline void write_values_csv(const std::string& path, const std::string& value_name, const Vector& values) {
    std::string out = "index," + value_name + "\n";
    for (Index i = 0; i < values.size(); ++i) out += std::to_string(i) + "," + io_detail::fmt(values(i)) + "\n";
    io_detail::write_file(path, out);
}

inline void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
    std::string out = "t";
    for (Index i = 0; i < traj.x.rows(); ++i) out += ",x" + std::to_string(i + 1);
    for (Index i = 0; i < traj.u.rows(); ++i) out += ",u" + std::to_string(i + 1);
    out += "\n";
    for (Index t = 0; t < traj.x.cols(); ++t) {
        out += std::to_string(t);
        for (Index i = 0; i < traj.x.rows(); ++i) out += "," + io_detail::fmt(traj.x(i, t));
        for (Index i = 0; i < traj.u.rows(); ++i) out += "," + io_detail::fmt(traj.u(i, t));
        out += "\n";
    }
    io_detail::write_file(path, out);
}

inline void write_messages_csv(const MessageLog& log, const std::string& path) {
    std::string out = "k,t_k,m_k\n";
    for (const auto& m : log.entries) {
        out += std::to_string(m.k) + "," + std::to_string(m.t) + "," + io_detail::fmt(m.value) + "\n";
    }
    io_detail::write_file(path, out);
}

inline std::uint32_t crc32_of_file(const std::string& path) {
    const std::string data = io_detail::read_file(path);
    uLong crc = ::crc32(0L, Z_NULL, 0);
    crc = ::crc32(crc, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size()));
    return static_cast<std::uint32_t>(crc);
}

// Record of one tool invocation: what ran, on what, with which knobs, and a
// checksum for every artifact it wrote.
struct RunManifest {
    std::string subcommand;
    std::string input_path;
    std::string output_dir;
    double delta = 0.0;
    double epsilon = 0.0;
    int iterations = 0;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::uint32_t>> artifacts;  // (file name, crc32)

    void add_artifact(const std::string& dir, const std::string& name) {
        artifacts.emplace_back(name, crc32_of_file(dir.empty() ? name : dir + "/" + name));
    }
};

inline Json manifest_to_json(const RunManifest& m) {
    Json arts = Json::array();
    for (const auto& [name, crc] : m.artifacts) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%08x", crc);
        arts.push_back(Json{{"file", name}, {"crc32", buf}});
    }
    return Json{{"subcommand", m.subcommand},
                {"input", m.input_path},
                {"output_dir", m.output_dir},
                {"options", Json{{"delta", m.delta}, {"epsilon", m.epsilon}, {"iterations", m.iterations}, {"seed", m.seed}}},
                {"artifacts", std::move(arts)}};
}

inline void save_manifest(const RunManifest& m, const std::string& path) {
    io_detail::write_file(path, manifest_to_json(m).dump(2) + "\n");
}

}  // namespace lrc
