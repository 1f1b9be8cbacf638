#include "gchain/io.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "gchain/errors.hpp"

namespace gchain {

namespace {

using ordered_json = nlohmann::ordered_json;

// Every parser funnels through this so malformed input surfaces as one error
// type no matter where nlohmann throws.
template <typename Fn>
auto parsed(const char* what, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(std::string(what) + ": " + e.what());
  }
}

ordered_json vector_rows(const std::vector<Eigen::VectorXd>& rows) {
  ordered_json out = ordered_json::array();
  for (const auto& v : rows) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) row.push_back(v[i]);
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<Eigen::VectorXd> rows_from(const ordered_json& j) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(j.size());
  for (const auto& row : j) {
    Eigen::VectorXd v(row.size());
    Eigen::Index i = 0;
    for (const auto& cell : row) v[i++] = cell.get<double>();
    out.push_back(std::move(v));
  }
  return out;
}

ordered_json point_set_json(const PointSet& y) {
  ordered_json j;
  j["dim"] = y.dim;
  j["points"] = vector_rows(y.points);
  if (!y.labels.empty()) j["labels"] = y.labels;
  return j;
}

PointSet point_set_from(const ordered_json& j) {
  PointSet y;
  y.dim = j.at("dim").get<int>();
  y.points = rows_from(j.at("points"));
  if (j.contains("labels")) y.labels = j.at("labels").get<std::vector<std::string>>();
  y.validate();
  return y;
}

ordered_json estimate_json(const McEstimate& e) {
  ordered_json j;
  j["value"] = e.value;
  j["std_error"] = e.std_error;
  j["samples"] = e.samples;
  j["seed"] = e.seed;
  j["stream_id"] = e.stream_id;
  return j;
}

McEstimate estimate_from(const ordered_json& j) {
  McEstimate e;
  e.value = j.at("value").get<double>();
  e.std_error = j.at("std_error").get<double>();
  e.samples = j.at("samples").get<std::uint64_t>();
  e.seed = j.at("seed").get<std::uint64_t>();
  e.stream_id = j.at("stream_id").get<std::uint32_t>();
  return e;
}

ordered_json chain_terms_json(const ChainTerms& t) {
  ordered_json j;
  j["lhs"] = estimate_json(t.lhs);
  j["g_y"] = estimate_json(t.g_y);
  j["d_y"] = t.d_y;
  j["l_f"] = t.l_f;
  j["r_f"] = estimate_json(t.r_f);
  j["base"] = estimate_json(t.base);
  j["y0_index"] = t.y0_index;
  return j;
}

ChainTerms chain_terms_from(const ordered_json& j) {
  ChainTerms t;
  t.lhs = estimate_from(j.at("lhs"));
  t.g_y = estimate_from(j.at("g_y"));
  t.d_y = j.at("d_y").get<double>();
  t.l_f = j.at("l_f").get<double>();
  t.r_f = estimate_from(j.at("r_f"));
  t.base = estimate_from(j.at("base"));
  t.y0_index = j.at("y0_index").get<int>();
  return t;
}

}  // namespace

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw parse_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw parse_error("read failed on " + path);
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw invariant_error("cannot create " + path);
  out << text;
  out.flush();
  if (!out) throw invariant_error("write failed on " + path);
}

std::string content_hash(const std::string& bytes) {
  std::string header = "blob " + std::to_string(bytes.size());
  header.push_back('\0');
  header += bytes;
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(header.data(), header.size(), digest, &len, EVP_sha1(), nullptr) != 1)
    throw invariant_error("digest computation failed");
  std::ostringstream hex;
  hex << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) hex << std::setw(2) << static_cast<int>(digest[i]);
  return hex.str();
}

std::string point_set_to_json(const PointSet& y) {
  y.validate();
  return point_set_json(y).dump(2);
}

PointSet point_set_from_json(const std::string& text) {
  return parsed("point set", [&] { return point_set_from(ordered_json::parse(text)); });
}

std::string point_set_to_csv(const PointSet& y) {
  y.validate();
  std::ostringstream out;
  out << std::setprecision(17);
  for (const auto& p : y.points) {
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      if (i) out << ',';
      out << p[i];
    }
    out << '\n';
  }
  return out.str();
}

PointSet point_set_from_csv(const std::string& text) {
  PointSet y;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::string cell = line.substr(start, comma - start);
      double v = 0.0;
      const char* first = cell.data();
      const char* last = cell.data() + cell.size();
      while (first != last && (*first == ' ' || *first == '\t')) ++first;
      while (last != first && (last[-1] == ' ' || last[-1] == '\t')) --last;
      const auto res = std::from_chars(first, last, v);
      if (res.ec != std::errc{} || res.ptr != last)
        throw parse_error("csv cell is not a number: '" + cell + "'");
      cells.push_back(v);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (y.points.empty()) y.dim = static_cast<int>(cells.size());
    if (static_cast<int>(cells.size()) != y.dim)
      throw parse_error("csv rows have inconsistent column counts");
    y.points.push_back(Eigen::Map<Eigen::VectorXd>(cells.data(), cells.size()));
  }
  y.validate();
  return y;
}

std::string tabulated_to_json(const TabulatedClass& f) {
  f.validate();
  ordered_json j;
  j["in_dim"] = f.in_dim;
  j["out_dim"] = f.out_dim;
  ordered_json members = ordered_json::array();
  for (const auto& per_point : f.values) members.push_back(vector_rows(per_point));
  j["functions"] = std::move(members);
  j["bound_points"] = point_set_json(f.bound_points);
  return j.dump(2);
}

TabulatedClass tabulated_from_json(const std::string& text) {
  return parsed("tabulated class", [&] {
    const auto j = ordered_json::parse(text);
    TabulatedClass f;
    f.in_dim = j.at("in_dim").get<int>();
    f.out_dim = j.at("out_dim").get<int>();
    for (const auto& member : j.at("functions")) f.values.push_back(rows_from(member));
    f.bound_points = point_set_from(j.at("bound_points"));
    f.validate();
    return f;
  });
}

std::string kernel_ball_to_json(const KernelBallClass& f) {
  f.validate();
  ordered_json j;
  j["kernel_width"] = f.kernel_width;
  j["ball_radius"] = f.ball_radius;
  j["stack_count"] = f.stack_count;
  return j.dump(2);
}

KernelBallClass kernel_ball_from_json(const std::string& text) {
  return parsed("kernel ball class", [&] {
    const auto j = ordered_json::parse(text);
    KernelBallClass f;
    f.kernel_width = j.at("kernel_width").get<double>();
    f.ball_radius = j.at("ball_radius").get<double>();
    f.stack_count = j.at("stack_count").get<int>();
    f.validate();
    return f;
  });
}

std::string chain_terms_to_json(const ChainTerms& t) { return chain_terms_json(t).dump(); }

ChainTerms chain_terms_from_json(const std::string& text) {
  return parsed("chain terms", [&] { return chain_terms_from(ordered_json::parse(text)); });
}

std::string suite_to_json_lines(const std::vector<ChainTerms>& suite) {
  std::string out;
  for (const auto& t : suite) {
    out += chain_terms_to_json(t);
    out += '\n';
  }
  return out;
}

std::vector<ChainTerms> suite_from_json_lines(const std::string& text) {
  std::vector<ChainTerms> suite;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    suite.push_back(chain_terms_from_json(line));
  }
  return suite;
}

std::string fit_to_json(const FittedConstants& fit) {
  ordered_json j;
  j["c1"] = fit.c1;
  j["c2"] = fit.c2;
  ordered_json pareto = ordered_json::array();
  for (const auto& corner : fit.pareto) pareto.push_back({corner[0], corner[1]});
  j["pareto"] = std::move(pareto);
  j["binding_instance"] = fit.binding_instance;
  j["instances"] = fit.instances;
  j["dropped"] = fit.dropped;
  return j.dump(2);
}

FittedConstants fit_from_json(const std::string& text) {
  return parsed("fit report", [&] {
    const auto j = ordered_json::parse(text);
    FittedConstants fit;
    fit.c1 = j.at("c1").get<double>();
    fit.c2 = j.at("c2").get<double>();
    for (const auto& corner : j.at("pareto"))
      fit.pareto.push_back({corner.at(0).get<double>(), corner.at(1).get<double>()});
    fit.binding_instance = j.at("binding_instance").get<int>();
    fit.instances = j.at("instances").get<int>();
    fit.dropped = j.at("dropped").get<std::vector<int>>();
    return fit;
  });
}

std::string risk_input_to_json(const RiskBoundInput& input) {
  ordered_json j;
  j["empirical_mean"] = input.empirical_mean;
  j["n"] = input.n;
  j["g_hat"] = input.g_hat;
  j["delta"] = input.delta;
  return j.dump(2);
}

RiskBoundInput risk_input_from_json(const std::string& text) {
  return parsed("risk bound input", [&] {
    const auto j = ordered_json::parse(text);
    RiskBoundInput input;
    input.empirical_mean = j.at("empirical_mean").get<double>();
    input.n = j.at("n").get<int>();
    input.g_hat = j.at("g_hat").get<double>();
    input.delta = j.at("delta").get<double>();
    return input;
  });
}

std::string two_layer_spec_to_json(const TwoLayerSpec& spec) {
  spec.validate();
  ordered_json j;
  j["b1"] = spec.b1;
  j["b2"] = spec.b2;
  j["delta1"] = spec.delta1;
  j["delta2"] = spec.delta2;
  j["m1"] = spec.m1;
  j["n"] = spec.n;
  j["c1"] = spec.c1;
  j["c2"] = spec.c2;
  return j.dump(2);
}

TwoLayerSpec two_layer_spec_from_json(const std::string& text) {
  return parsed("two layer spec", [&] {
    const auto j = ordered_json::parse(text);
    TwoLayerSpec spec;
    spec.b1 = j.at("b1").get<double>();
    spec.b2 = j.at("b2").get<double>();
    spec.delta1 = j.at("delta1").get<double>();
    spec.delta2 = j.at("delta2").get<double>();
    spec.m1 = j.at("m1").get<int>();
    spec.n = j.at("n").get<int>();
    spec.c1 = j.at("c1").get<double>();
    spec.c2 = j.at("c2").get<double>();
    spec.validate();
    return spec;
  });
}

std::string deep_spec_to_json(const DeepSpec& spec) {
  ordered_json j;
  j["c1"] = spec.c1;
  j["c2"] = spec.c2;
  ordered_json layers = ordered_json::array();
  for (const auto& l : spec.layers) {
    ordered_json lj;
    lj["lip"] = l.lip;
    lj["r_val"] = l.r_val;
    lj["g_base"] = l.g_base;
    lj["diam_in"] = l.diam_in;
    lj["out_dim"] = l.out_dim;
    lj["g0"] = l.g0;
    layers.push_back(std::move(lj));
  }
  j["layers"] = std::move(layers);
  return j.dump(2);
}

DeepSpec deep_spec_from_json(const std::string& text) {
  return parsed("deep spec", [&] {
    const auto j = ordered_json::parse(text);
    DeepSpec spec;
    spec.c1 = j.at("c1").get<double>();
    spec.c2 = j.at("c2").get<double>();
    for (const auto& lj : j.at("layers")) {
      LayerSummary l;
      l.lip = lj.at("lip").get<double>();
      l.r_val = lj.at("r_val").get<double>();
      l.g_base = lj.at("g_base").get<double>();
      l.diam_in = lj.at("diam_in").get<double>();
      l.out_dim = lj.at("out_dim").get<int>();
      if (lj.contains("g0")) l.g0 = lj.at("g0").get<double>();
      spec.layers.push_back(l);
    }
    return spec;
  });
}

std::string bound_report_to_json(const BoundReport& report) {
  ordered_json j;
  ordered_json terms = ordered_json::array();
  for (const auto& t : report.terms) {
    ordered_json tj;
    tj["name"] = t.name;
    tj["value"] = t.value;
    tj["formula"] = t.formula;
    terms.push_back(std::move(tj));
  }
  j["terms"] = std::move(terms);
  j["total"] = report.total;
  j["notes"] = report.notes;
  return j.dump(2);
}

BoundReport bound_report_from_json(const std::string& text) {
  return parsed("bound report", [&] {
    const auto j = ordered_json::parse(text);
    BoundReport report;
    for (const auto& tj : j.at("terms")) {
      BoundTerm t;
      t.name = tj.at("name").get<std::string>();
      t.value = tj.at("value").get<double>();
      t.formula = tj.at("formula").get<std::string>();
      report.terms.push_back(std::move(t));
    }
    report.total = j.at("total").get<double>();
    report.notes = j.at("notes").get<std::vector<std::string>>();
    return report;
  });
}

std::string bound_report_to_csv(const BoundReport& report) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "name,value\n";
  for (const auto& t : report.terms) out << t.name << ',' << t.value << '\n';
  out << "total," << report.total << '\n';
  return out.str();
}

}  // namespace gchain
