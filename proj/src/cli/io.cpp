#include "mthdro/io.hpp"

#include <fstream>
#include <sstream>

namespace mthdro::io {

namespace {

[[noreturn]] void violation(const std::string& path, const std::string& what) {
    throw Error(ErrorCode::SchemaViolation, (path.empty() ? std::string("/") : path) + ": " + what);
}

const Json& member(const Json& j, const std::string& key, const std::string& path) {
    if (!j.is_object()) violation(path, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) violation(path + "/" + key, "required field is missing");
    return *it;
}

const Json* optional_member(const Json& j, const std::string& key, const std::string& path) {
    if (!j.is_object()) violation(path, "expected an object");
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

double read_number(const Json& j, const std::string& path) {
    if (!j.is_number()) violation(path, "expected a number");
    return j.get<double>();
}

int read_int(const Json& j, const std::string& path) {
    if (!j.is_number_integer()) violation(path, "expected an integer");
    return j.get<int>();
}

std::string read_string(const Json& j, const std::string& path) {
    if (!j.is_string()) violation(path, "expected a string");
    return j.get<std::string>();
}

// Runs a constructor and reports its validation failure at `path`.
template <class F>
auto at_path(const std::string& path, F&& make) {
    try {
        return make();
    } catch (const Error& e) {
        if (e.code() == ErrorCode::SchemaViolation) throw;
        violation(path, e.what());
    }
}

Norm read_norm(const Json& j, const std::string& path) {
    return at_path(path, [&] { return parse_norm(read_string(j, path)); });
}

UniformMixture read_mixture(const Json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) violation(path, "expected a nonempty array of components");
    UniformMixture m;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string p = path + "/" + std::to_string(i);
        m.push_back({read_number(member(j[i], "weight", p), p + "/weight"), read_number(member(j[i], "lo", p), p + "/lo"),
                     read_number(member(j[i], "hi", p), p + "/hi")});
    }
    return at_path(path, [&] { return validated(m, path); });
}

std::vector<double> read_doubles(const Json& j, const std::string& path) {
    const Vector v = read_vector(j, path);
    return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

Json parse_file(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCode::InvalidArgument, "cannot open '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw Error(ErrorCode::SchemaViolation, "/: " + path + " is not valid JSON (" + e.what() + ")");
    }
}

Vector read_vector(const Json& j, const std::string& path, int size) {
    if (!j.is_array()) violation(path, "expected an array of numbers");
    if (size >= 0 && static_cast<int>(j.size()) != size) {
        violation(path, "expected " + std::to_string(size) + " entries, found " + std::to_string(j.size()));
    }
    Vector v(static_cast<int>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<int>(i)) = read_number(j[i], path + "/" + std::to_string(i));
    return v;
}

Matrix read_matrix(const Json& j, const std::string& path, int cols) {
    if (!j.is_array()) violation(path, "expected an array of rows");
    const int rows = static_cast<int>(j.size());
    if (rows == 0) return Matrix(0, cols < 0 ? 0 : cols);
    if (cols < 0) {
        if (!j[0].is_array()) violation(path + "/0", "expected an array of numbers");
        cols = static_cast<int>(j[0].size());
    }
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r) m.row(r) = read_vector(j[r], path + "/" + std::to_string(r), cols).transpose();
    return m;
}

DiscreteDistribution read_distribution(const Json& j, const std::string& path) {
    const Matrix atoms = read_matrix(member(j, "atoms", path), path + "/atoms");
    if (atoms.rows() == 0) violation(path + "/atoms", "at least one atom is required");
    if (const Json* w = optional_member(j, "weights", path)) {
        const Vector weights = read_vector(*w, path + "/weights", static_cast<int>(atoms.rows()));
        return at_path(path, [&] { return DiscreteDistribution(atoms, weights); });
    }
    return DiscreteDistribution::uniform(atoms);
}

ComponentStructure read_structure(const Json& j, const std::string& path, const Overrides& o) {
    const Json& dj = member(j, "dims", path);
    if (!dj.is_array()) violation(path + "/dims", "expected an array of integers");
    std::vector<int> dims;
    for (std::size_t i = 0; i < dj.size(); ++i) dims.push_back(read_int(dj[i], path + "/dims/" + std::to_string(i)));
    std::vector<Norm> norms;
    if (o.norms) {
        norms = *o.norms;
    } else {
        const Json& nj = member(j, "norms", path);
        if (!nj.is_array()) violation(path + "/norms", "expected an array of norm names");
        for (std::size_t i = 0; i < nj.size(); ++i) norms.push_back(read_norm(nj[i], path + "/norms/" + std::to_string(i)));
    }
    int p = 1;
    if (o.p) {
        p = *o.p;
    } else if (const Json* pj = optional_member(j, "p", path)) {
        p = read_int(*pj, path + "/p");
    }
    return at_path(path, [&] { return ComponentStructure(dims, norms, p); });
}

Polyhedron read_polyhedron(const Json& j, const std::string& path, int d) {
    const Matrix C = read_matrix(member(j, "C", path), path + "/C", d);
    const Vector f = read_vector(member(j, "f", path), path + "/f", static_cast<int>(C.rows()));
    if (C.rows() == 0) return Polyhedron::whole_space(d);
    return at_path(path, [&] { return Polyhedron(C, f); });
}

PwaFunction read_pwa(const Json& j, const std::string& path, int d) {
    const Matrix slopes = read_matrix(member(j, "slopes", path), path + "/slopes", d);
    const Vector offsets = read_vector(member(j, "offsets", path), path + "/offsets", static_cast<int>(slopes.rows()));
    auto combiner = PwaFunction::Combiner::Max;
    if (const Json* c = optional_member(j, "combiner", path)) {
        const std::string s = read_string(*c, path + "/combiner");
        if (s == "min") {
            combiner = PwaFunction::Combiner::Min;
        } else if (s != "max") {
            violation(path + "/combiner", "expected \"max\" or \"min\"");
        }
    }
    return at_path(path, [&] { return PwaFunction(slopes, offsets, combiner); });
}

QuadraticFunction read_quadratic(const Json& j, const std::string& path, int d) {
    const Matrix Q = read_matrix(member(j, "Q", path), path + "/Q", d);
    if (Q.rows() != d) violation(path + "/Q", "expected a " + std::to_string(d) + "x" + std::to_string(d) + " matrix");
    const Vector q = read_vector(member(j, "q", path), path + "/q", d);
    return at_path(path, [&] { return QuadraticFunction(Q, q); });
}

GridSpec read_grid(const Json& j, const std::string& path, int d) {
    GridSpec g;
    g.lo = read_doubles(member(j, "lo", path), path + "/lo");
    g.hi = read_doubles(member(j, "hi", path), path + "/hi");
    const Json& cj = member(j, "count", path);
    if (!cj.is_array()) violation(path + "/count", "expected an array of integers");
    for (std::size_t i = 0; i < cj.size(); ++i) g.count.push_back(read_int(cj[i], path + "/count/" + std::to_string(i)));
    if (g.dim() != d || static_cast<int>(g.lo.size()) != d || static_cast<int>(g.hi.size()) != d) {
        violation(path, "grid needs " + std::to_string(d) + " entries in lo, hi and count");
    }
    at_path(path, [&] {
        g.validate();
        return 0;
    });
    return g;
}

MthSpec read_mth(const Json& doc, const Overrides& o) {
    const ComponentStructure cs = read_structure(member(doc, "structure", ""), "/structure", o);
    Vector budgets;
    if (o.budgets) {
        budgets = Eigen::Map<const Vector>(o.budgets->data(), static_cast<int>(o.budgets->size()));
    } else {
        budgets = read_vector(member(doc, "budgets", ""), "/budgets", cs.components());
    }
    const Json& ref = member(doc, "reference", "");
    if (const Json* margs = optional_member(ref, "marginals", "/reference")) {
        if (!margs->is_array() || margs->empty()) violation("/reference/marginals", "expected a nonempty array");
        std::vector<DiscreteDistribution> ms;
        for (std::size_t k = 0; k < margs->size(); ++k) {
            ms.push_back(read_distribution((*margs)[k], "/reference/marginals/" + std::to_string(k)));
        }
        return at_path("/reference", [&] { return MthSpec(ProductDiscreteDistribution(ms), budgets, cs, o.cap); });
    }
    const DiscreteDistribution q = read_distribution(ref, "/reference");
    return at_path("/reference", [&] { return MthSpec(q, budgets, cs); });
}

Polyhedron read_support(const Json& doc, int d) {
    if (const Json* s = optional_member(doc, "support", "")) return read_polyhedron(*s, "/support", d);
    return Polyhedron::whole_space(d);
}

PolyUnion read_union(const Json& doc, int d) {
    PolyUnion u;
    u.support = read_support(doc, d);
    const Json& pj = member(member(doc, "union", ""), "pieces", "/union");
    if (!pj.is_array() || pj.empty()) violation("/union/pieces", "expected a nonempty array of polyhedra");
    for (std::size_t i = 0; i < pj.size(); ++i) u.pieces.push_back(read_polyhedron(pj[i], "/union/pieces/" + std::to_string(i), d));
    return u;
}

OpenPolyUnion read_open_union(const Json& doc, int d) {
    OpenPolyUnion u;
    u.support = read_support(doc, d);
    const Json& pj = member(member(doc, "open_union", ""), "pieces", "/open_union");
    if (!pj.is_array() || pj.empty()) violation("/open_union/pieces", "expected a nonempty array of open polytopes");
    for (std::size_t i = 0; i < pj.size(); ++i) {
        const std::string p = "/open_union/pieces/" + std::to_string(i);
        OpenPolytope P;
        P.normals = read_matrix(member(pj[i], "normals", p), p + "/normals", d);
        P.bounds = read_vector(member(pj[i], "bounds", p), p + "/bounds", static_cast<int>(P.normals.rows()));
        u.pieces.push_back(std::move(P));
    }
    return u;
}

DrccpProblem read_drccp(const Json& doc, int d) {
    const std::string root = "/problem";
    const Json& pj = member(doc, "problem", "");
    DrccpProblem pr;
    pr.g = read_vector(member(pj, "g", root), root + "/g");
    const int l = static_cast<int>(pr.g.size());
    if (l == 0) violation(root + "/g", "decision vector is empty");
    if (const Json* X = optional_member(pj, "X", root)) {
        pr.X = read_polyhedron(*X, root + "/X", l);
    } else {
        pr.X = Polyhedron::whole_space(l);
    }
    pr.support = read_support(doc, d);
    const Json& cj = member(pj, "constraints", root);
    if (!cj.is_array()) violation(root + "/constraints", "expected an array");
    for (std::size_t i = 0; i < cj.size(); ++i) {
        const std::string cp = root + "/constraints/" + std::to_string(i);
        ChanceConstraint cc;
        cc.alpha = read_number(member(cj[i], "alpha", cp), cp + "/alpha");
        const Json& pieces = member(cj[i], "pieces", cp);
        if (!pieces.is_array() || pieces.empty()) violation(cp + "/pieces", "expected a nonempty array");
        for (std::size_t j = 0; j < pieces.size(); ++j) {
            const std::string pp = cp + "/pieces/" + std::to_string(j);
            DrccpPiece piece;
            if (const Json* A = optional_member(pieces[j], "A", pp)) {
                piece.A = read_matrix(*A, pp + "/A", d);
                if (piece.A.rows() != l) violation(pp + "/A", "expected " + std::to_string(l) + " rows");
            }
            const Json* xs = optional_member(pieces[j], "xi_slope", pp);
            piece.xi_slope = xs ? read_vector(*xs, pp + "/xi_slope", d) : Vector::Zero(d);
            const Json* cs = optional_member(pieces[j], "x_slope", pp);
            piece.x_slope = cs ? read_vector(*cs, pp + "/x_slope", l) : Vector::Zero(l);
            if (const Json* off = optional_member(pieces[j], "offset", pp)) piece.offset = read_number(*off, pp + "/offset");
            cc.pieces.push_back(std::move(piece));
        }
        pr.constraints.push_back(std::move(cc));
    }
    at_path(root, [&] {
        pr.validate(d);
        return 0;
    });
    return pr;
}

ExperimentConfig read_experiment_config(const Json& doc, ExperimentConfig c) {
    if (!doc.is_object()) violation("", "expected an object");
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        const std::string& k = it.key();
        const std::string p = "/" + k;
        const Json& v = it.value();
        if (k == "schema") {
            continue;
        } else if (k == "d_nominal") {
            c.d_nominal = read_number(v, p);
        } else if (k == "alpha") {
            c.alpha = read_number(v, p);
        } else if (k == "N") {
            c.N = read_int(v, p);
        } else if (k == "trials") {
            c.trials = read_int(v, p);
        } else if (k == "eps_grid") {
            c.eps_grid = read_doubles(v, p);
        } else if (k == "K") {
            const Vector K = read_vector(v, p, 2);
            c.K1 = static_cast<int>(K(0));
            c.K2 = static_cast<int>(K(1));
        } else if (k == "confidence") {
            c.confidence = read_number(v, p);
        } else if (k == "seed") {
            if (!v.is_number_unsigned()) violation(p, "expected a nonnegative integer");
            c.seed = v.get<std::uint64_t>();
        } else if (k == "xi1") {
            c.xi1 = read_mixture(v, p);
        } else if (k == "xi2") {
            c.xi2 = read_mixture(v, p);
        } else if (k == "support_margin") {
            c.support_margin = read_number(v, p);
        } else if (k == "budget_shares") {
            c.budget_shares = read_doubles(v, p);
        } else if (k == "clustered_rule") {
            c.clustered_rule = at_path(p, [&] { return parse_budget_rule(read_string(v, p)); });
        } else if (k == "workers") {
            c.workers = read_int(v, p);
        } else {
            violation(p, "unknown field");
        }
    }
    at_path("", [&] {
        c.validate();
        return 0;
    });
    return c;
}

Json to_json(const Vector& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

Json to_json(const Matrix& m) {
    Json rows = Json::array();
    for (int r = 0; r < m.rows(); ++r) rows.push_back(to_json(Vector(m.row(r).transpose())));
    return rows;
}

Json to_json(const DiscreteDistribution& d) { return Json{{"atoms", to_json(d.atoms())}, {"weights", to_json(d.weights())}}; }

Json to_json(const ProgramDimensions& dims) {
    return Json{{"variables", dims.variables},   {"equalities", dims.equalities}, {"inequalities", dims.inequalities},
                {"soc_blocks", dims.soc_blocks}, {"soc_rows", dims.soc_rows},     {"psd_blocks", dims.psd_blocks},
                {"psd_rows", dims.psd_rows}};
}

Json to_json(const ExperimentConfig& c) {
    auto mixture = [](const UniformMixture& m) {
        Json a = Json::array();
        for (const auto& u : m) a.push_back({{"weight", u.weight}, {"lo", u.lo}, {"hi", u.hi}});
        return a;
    };
    return Json{{"d_nominal", c.d_nominal},
                {"alpha", c.alpha},
                {"N", c.N},
                {"trials", c.trials},
                {"eps_grid", c.eps_grid},
                {"K", {c.K1, c.K2}},
                {"confidence", c.confidence},
                {"seed", c.seed},
                {"xi1", mixture(c.xi1)},
                {"xi2", mixture(c.xi2)},
                {"support_margin", c.support_margin},
                {"budget_shares", c.budget_shares},
                {"clustered_rule", to_string(c.clustered_rule)}};
}

Json variables_json(const Solution& sol) {
    Json out = Json::object();
    for (const auto& [name, v] : sol.variables) out[name] = to_json(v);
    return out;
}

Matrix read_csv_matrix(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCode::InvalidArgument, "cannot open '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                require(cell.find_first_not_of(" \t\r", used) == std::string::npos, ErrorCode::InvalidArgument, "");
            } catch (const std::exception&) {
                throw Error(ErrorCode::SchemaViolation, path + ":" + std::to_string(lineno) + ": '" + cell + "' is not a number");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw Error(ErrorCode::SchemaViolation, path + ":" + std::to_string(lineno) + ": expected " +
                                                        std::to_string(rows.front().size()) + " columns");
        }
        rows.push_back(std::move(row));
    }
    require(!rows.empty(), ErrorCode::SchemaViolation, path + ": no samples");
    Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
    for (int r = 0; r < m.rows(); ++r) {
        for (int c = 0; c < m.cols(); ++c) m(r, c) = rows[r][c];
    }
    return m;
}

}  // namespace mthdro::io
