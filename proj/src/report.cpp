#include "reasonbench/report.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <sstream>

#include "reasonbench/error.hpp"
#include "reasonbench/util/files.hpp"

namespace reasonbench {

namespace {

using ojson = nlohmann::ordered_json;

const std::vector<std::string>& task_order() {
  static const std::vector<std::string> kTasks = {"ier", "sr", "dsr", "br"};
  return kTasks;
}

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string prefix_of(const std::string& id) {
  auto slash = id.find('/');
  return slash == std::string::npos ? "unknown" : id.substr(0, slash);
}

std::string round2(double x) {
  if (!std::isfinite(x)) return "nan";
  double scaled = x * 100.0;
  double fl = std::floor(scaled);
  double frac = scaled - fl;
  double r;
  if (std::fabs(frac - 0.5) < 1e-7)
    r = std::fmod(fl, 2.0) == 0.0 ? fl : fl + 1.0;
  else
    r = std::round(scaled);
  long long n = std::llround(r);
  std::string sign = n < 0 ? "-" : "";
  n = std::llabs(n);
  std::string frac_part = std::to_string(n % 100);
  if (frac_part.size() < 2) frac_part.insert(0, "0");
  return sign + std::to_string(n / 100) + "." + frac_part;
}

// Per-program outcome a task is correlated against and counted correct by.
double outcome_of(const ScoreRecord& r) {
  if (r.task == "sr") {
    auto it = r.components.find("pass_with_test");
    return it == r.components.end() ? 0.0 : it->second;
  }
  return r.s_value;
}

bool counts_correct(const ScoreRecord& r) {
  auto v = outcome_of(r);
  return r.task == "dsr" ? v > 0.0 : v == 1.0;
}

std::vector<std::string> split_csv_row(const std::string& line, int row) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  if (quoted) throw MalformedRow(row, "unterminated quote");
  out.push_back(cell);
  return out;
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

std::string csv_line(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += csv_cell(cells[i]);
  }
  return out + "\n";
}

bool parse_flag(std::string v, int row) {
  v = lower(trim(v));
  if (v == "1" || v == "true" || v == "yes" || v == "pass" || v == "correct") return true;
  if (v == "0" || v == "false" || v == "no" || v == "fail" || v == "incorrect") return false;
  throw MalformedRow(row, "cannot read '" + v + "' as correct/incorrect");
}

std::string pct(const std::optional<double>& v) { return v ? format_percent(*v) : ""; }

std::optional<double> BenchmarkRates::*const kRateFields[] = {
    &BenchmarkRates::r_ier, &BenchmarkRates::pass_no_test, &BenchmarkRates::pass_with_test, &BenchmarkRates::r_sr,
    &BenchmarkRates::pass_cprime, &BenchmarkRates::r_dsr, &BenchmarkRates::br_rate};
const char* const kRateNames[] = {"r_ier", "pass_no_test", "pass_with_test", "r_sr", "pass_cprime", "r_dsr", "br"};

}  // namespace

std::string region_signature(const std::set<std::string>& members) {
  if (members.empty()) return "none";
  std::string out;
  for (const auto& m : members) {
    if (!out.empty()) out += "+";
    out += m;
  }
  return out;
}

std::size_t OverlapPartition::count(const std::set<std::string>& members) const {
  auto it = region_counts.find(region_signature(members));
  return it == region_counts.end() ? 0 : it->second;
}

std::size_t OverlapPartition::all() const {
  return count(std::set<std::string>(task_set.begin(), task_set.end()));
}

OverlapPartition overlap_sets(const std::map<std::string, std::set<std::string>>& outcomes,
                              const std::set<std::string>& universe) {
  OverlapPartition p;
  for (const auto& [task, ids] : outcomes) {
    if (task.empty() || task == "none" || task.find('+') != std::string::npos)
      throw ConstraintViolation("task name '" + task + "' cannot label a region");
    for (const auto& id : ids)
      if (!universe.count(id)) throw OutOfUniverse("'" + id + "' in " + task + " is outside the universe");
    p.task_set.push_back(task);
  }
  if (p.task_set.size() > 16) throw ConstraintViolation("too many tasks for a region table");
  p.universe = universe.size();
  const std::size_t n = p.task_set.size();
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    std::set<std::string> members;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (std::size_t{1} << i)) members.insert(p.task_set[i]);
    p.region_counts[region_signature(members)] = 0;
  }
  for (const auto& id : universe) {
    std::set<std::string> members;
    for (const auto& [task, ids] : outcomes)
      if (ids.count(id)) members.insert(task);
    ++p.region_counts[region_signature(members)];
  }
  return p;
}

std::set<std::string> correct_ids(const std::vector<ScoreRecord>& records, std::string_view task) {
  std::set<std::string> out;
  for (const auto& r : records)
    if (r.task == task && counts_correct(r)) out.insert(r.program_id);
  return out;
}

std::string normalize_program_id(std::string_view id) {
  std::string s = trim(id);
  auto slash = s.find('/');
  if (slash == std::string::npos) return s;
  return lower(s.substr(0, slash)) + s.substr(slash);
}

ExternalOutcomes import_external_outcomes(const std::filesystem::path& path, std::string_view format,
                                          const std::set<std::string>& known_ids) {
  ExternalOutcomes ext;
  ext.source = path.stem().string();
  std::string text = read_file(path);
  auto lines = split_lines(text);
  auto add = [&](const std::string& raw_id, bool ok, int row) {
    auto id = normalize_program_id(raw_id);
    if (id.empty()) throw MalformedRow(row, "empty program id");
    if (ext.outcomes.count(id)) throw MalformedRow(row, "duplicate program id '" + id + "'");
    ext.outcomes[id] = ok;
    if (!known_ids.empty() && !known_ids.count(id)) ext.orphans.push_back(id);
  };

  if (format == "csv") {
    int row = 0;
    std::size_t id_col = 0, ok_col = 0;
    bool header = false;
    for (const auto& line : lines) {
      ++row;
      if (trim(line).empty()) continue;
      auto cells = split_csv_row(line, row);
      if (!header) {
        auto find = [&](std::initializer_list<const char*> names) -> std::size_t {
          for (std::size_t i = 0; i < cells.size(); ++i)
            for (const char* n : names)
              if (lower(trim(cells[i])) == n) return i;
          throw MalformedRow(row, "header lacks a " + std::string(*names.begin()) + " column");
        };
        id_col = find({"program_id", "id"});
        ok_col = find({"correct", "pass", "outcome"});
        header = true;
        continue;
      }
      if (cells.size() <= std::max(id_col, ok_col)) throw MalformedRow(row, "too few columns");
      add(cells[id_col], parse_flag(cells[ok_col], row), row);
    }
    if (!header) throw MalformedRow(0, "missing header");
  } else if (format == "jsonl") {
    int row = 0;
    for (const auto& line : lines) {
      ++row;
      if (trim(line).empty()) continue;
      try {
        auto j = nlohmann::json::parse(line);
        const auto& v = j.at("correct");
        bool ok = v.is_boolean() ? v.get<bool>()
                  : v.is_number() ? v.get<double>() != 0.0
                                  : parse_flag(v.get<std::string>(), row);
        add(j.at("program_id").get<std::string>(), ok, row);
      } catch (const nlohmann::json::exception& e) {
        throw MalformedRow(row, e.what());
      }
    }
  } else {
    throw UnknownFormat("external outcomes format must be csv or jsonl, not '" + std::string(format) + "'");
  }
  std::sort(ext.orphans.begin(), ext.orphans.end());
  return ext;
}

std::string format_percent(double value) { return round2(value * 100.0); }

std::string format_fixed2(double value) { return round2(value); }

Report summary_tables(const ReportInputs& in) {
  Report rep;
  std::map<std::string, std::vector<ScoreRecord>> by_model;
  for (const auto& r : in.scores) by_model[r.model].push_back(r);

  std::map<std::string, std::string> bench;
  for (const auto& r : in.scores) {
    auto it = in.benchmark_of.find(r.program_id);
    bench[r.program_id] = it == in.benchmark_of.end() ? prefix_of(r.program_id) : it->second;
  }

  std::set<std::string> scored;
  for (const auto& r : in.scores) scored.insert(r.program_id);
  if (!in.profiles.empty())
    for (const auto& id : scored)
      if (!in.profiles.count(id)) rep.orphans.push_back({"scores", id, "no complexity profile"});
  if (!in.benchmark_of.empty())
    for (const auto& id : scored)
      if (!in.benchmark_of.count(id)) rep.orphans.push_back({"scores", id, "not in corpus"});

  for (const auto& [model, records] : by_model) {
    auto rates = compute_rates(records, bench);
    // Named benchmarks first, the total last.
    for (const auto& [name, r] : rates)
      if (name != "total") rep.rates.push_back({model, r});
    if (rates.count("total")) rep.rates.push_back({model, rates.at("total")});

    for (const auto& task : task_order()) {
      std::map<std::string, std::map<std::string, double>> outcomes;  // benchmark -> id -> outcome
      for (const auto& r : records) {
        if (r.task != task) continue;
        double v = outcome_of(r);
        outcomes[bench[r.program_id]][r.program_id] = v;
        outcomes["total"][r.program_id] = v;
      }
      if (outcomes.empty()) continue;
      std::vector<std::string> order;
      for (const auto& [b, _] : outcomes)
        if (b != "total") order.push_back(b);
      order.push_back("total");
      for (const auto& b : order) {
        std::map<std::string, Correlation> table;
        if (in.profiles.empty()) {
          for (const auto& m : metric_names()) table[m] = Correlation{std::nullopt, 0, "no complexity profiles"};
        } else {
          table = correlation_table(in.profiles, outcomes[b]);
        }
        for (const auto& m : metric_names()) {
          auto it = table.find(m);
          Correlation c = it == table.end() ? Correlation{std::nullopt, 0, "not measured"} : it->second;
          rep.correlations.push_back({model, task, b, m, c});
        }
      }
    }

    std::map<std::string, std::set<std::string>> sets;
    std::map<std::string, std::set<std::string>> scored_for;
    for (const auto& r : records) scored_for[r.task].insert(r.program_id);
    if (scored_for.size() >= 2) {
      // Only programs every task was run on, so absent tasks do not read as failures.
      std::set<std::string> universe = scored_for.begin()->second;
      for (const auto& [task, ids] : scored_for) {
        std::set<std::string> keep;
        std::set_intersection(universe.begin(), universe.end(), ids.begin(), ids.end(),
                              std::inserter(keep, keep.end()));
        universe = std::move(keep);
      }
      for (const auto& [task, _] : scored_for) {
        std::set<std::string> ok;
        for (const auto& id : correct_ids(records, task))
          if (universe.count(id)) ok.insert(id);
        sets[upper(task)] = std::move(ok);
      }
      rep.overlaps.push_back({model, "tasks", overlap_sets(sets, universe)});
    }

    auto ours_all = correct_ids(records, "ier");
    std::set<std::string> ier_ids;
    for (const auto& r : records)
      if (r.task == "ier") ier_ids.insert(r.program_id);
    for (const auto& ext : in.external) {
      if (ier_ids.empty()) continue;
      std::set<std::string> common, ours, theirs;
      for (const auto& [id, ok] : ext.outcomes) {
        if (!ier_ids.count(id)) continue;
        common.insert(id);
        if (ok) theirs.insert(id);
        if (ours_all.count(id)) ours.insert(id);
      }
      rep.external.push_back({model, ext.source, common.size(), ours.size(), theirs.size()});
      rep.overlaps.push_back({model, ext.source, overlap_sets({{"ours", ours}, {ext.source, theirs}}, common)});
    }
  }

  for (const auto& ext : in.external) {
    for (const auto& id : ext.orphans) rep.orphans.push_back({ext.source, id, "not in corpus"});
    for (const auto& [id, _] : ext.outcomes)
      if (!scored.count(id) && !std::binary_search(ext.orphans.begin(), ext.orphans.end(), id))
        rep.orphans.push_back({ext.source, id, "not scored"});
  }
  std::sort(rep.orphans.begin(), rep.orphans.end(), [](const Orphan& a, const Orphan& b) {
    return std::tie(a.source, a.program_id, a.reason) < std::tie(b.source, b.program_id, b.reason);
  });
  return rep;
}

ReportFormat parse_report_format(std::string_view s) {
  if (s == "csv") return ReportFormat::csv;
  if (s == "json") return ReportFormat::json;
  if (s == "md" || s == "markdown") return ReportFormat::markdown;
  throw Error("unknown report format '" + std::string(s) + "'");
}

std::string report_to_json(const Report& rep) {
  auto num = [](const std::optional<double>& v) -> ojson {
    if (!v) return nullptr;
    return std::stod(format_percent(*v));
  };
  ojson j;
  j["rates"] = ojson::array();
  for (const auto& row : rep.rates) {
    ojson r;
    r["model"] = row.model;
    r["benchmark"] = row.rates.benchmark;
    r["m"] = row.rates.m;
    for (std::size_t i = 0; i < std::size(kRateFields); ++i) r[kRateNames[i]] = num(row.rates.*kRateFields[i]);
    j["rates"].push_back(r);
  }
  j["correlations"] = ojson::array();
  for (const auto& row : rep.correlations) {
    ojson r;
    r["model"] = row.model;
    r["task"] = row.task;
    r["benchmark"] = row.benchmark;
    r["metric"] = row.metric;
    r["n"] = row.rho.n;
    r["rho"] = row.rho.rho ? ojson(std::stod(format_fixed2(*row.rho.rho))) : ojson(nullptr);
    r["unavailable"] = row.rho.unavailable;
    j["correlations"].push_back(r);
  }
  j["overlaps"] = ojson::array();
  for (const auto& row : rep.overlaps) {
    ojson r;
    r["model"] = row.model;
    r["label"] = row.label;
    r["tasks"] = row.partition.task_set;
    r["universe"] = row.partition.universe;
    ojson regions = ojson::object();
    for (const auto& [sig, n] : row.partition.region_counts) regions[sig] = n;
    r["regions"] = regions;
    j["overlaps"].push_back(r);
  }
  j["external"] = ojson::array();
  for (const auto& row : rep.external) {
    ojson r;
    r["model"] = row.model;
    r["source"] = row.source;
    r["common"] = row.common;
    r["ours_correct"] = row.ours;
    r["theirs_correct"] = row.theirs;
    r["ours_rate"] = row.common ? ojson(std::stod(format_percent(double(row.ours) / double(row.common)))) : ojson(nullptr);
    r["theirs_rate"] =
        row.common ? ojson(std::stod(format_percent(double(row.theirs) / double(row.common)))) : ojson(nullptr);
    j["external"].push_back(r);
  }
  j["orphans"] = ojson::array();
  for (const auto& o : rep.orphans) j["orphans"].push_back({{"source", o.source}, {"program_id", o.program_id}, {"reason", o.reason}});
  return j.dump(2) + "\n";
}

std::map<std::string, std::string> report_to_csv(const Report& rep) {
  std::map<std::string, std::string> files;
  std::string rates = csv_line({"model", "benchmark", "m", "r_ier", "pass_no_test", "pass_with_test", "r_sr",
                                "pass_cprime", "r_dsr", "br"});
  for (const auto& row : rep.rates) {
    std::vector<std::string> cells = {row.model, row.rates.benchmark, std::to_string(row.rates.m)};
    for (auto f : kRateFields) cells.push_back(pct(row.rates.*f));
    rates += csv_line(cells);
  }
  files["rates.csv"] = rates;

  std::string corr = csv_line({"model", "task", "benchmark", "metric", "n", "rho", "unavailable"});
  for (const auto& row : rep.correlations)
    corr += csv_line({row.model, row.task, row.benchmark, row.metric, std::to_string(row.rho.n),
                      row.rho.rho ? format_fixed2(*row.rho.rho) : "", row.rho.unavailable});
  files["correlations.csv"] = corr;

  std::string ov = csv_line({"model", "label", "region", "count", "percent"});
  for (const auto& row : rep.overlaps)
    for (const auto& [sig, n] : row.partition.region_counts)
      ov += csv_line({row.model, row.label, sig, std::to_string(n),
                      row.partition.universe ? format_percent(double(n) / double(row.partition.universe)) : ""});
  files["overlaps.csv"] = ov;

  std::string ext = csv_line({"model", "source", "common", "ours_correct", "theirs_correct", "ours_rate", "theirs_rate"});
  for (const auto& row : rep.external)
    ext += csv_line({row.model, row.source, std::to_string(row.common), std::to_string(row.ours),
                     std::to_string(row.theirs), row.common ? format_percent(double(row.ours) / double(row.common)) : "",
                     row.common ? format_percent(double(row.theirs) / double(row.common)) : ""});
  files["external.csv"] = ext;

  std::string orph = csv_line({"source", "program_id", "reason"});
  for (const auto& o : rep.orphans) orph += csv_line({o.source, o.program_id, o.reason});
  files["orphans.csv"] = orph;
  return files;
}

std::string report_to_markdown(const Report& rep) {
  std::ostringstream md;
  md << "# Evaluation report\n";

  struct Column {
    const char* title;
    std::optional<double> BenchmarkRates::*field;
  };
  const std::vector<std::pair<std::string, std::vector<Column>>> sections = {
      {"ier", {{"R_IER", &BenchmarkRates::r_ier}}},
      {"sr",
       {{"No Test", &BenchmarkRates::pass_no_test},
        {"With Test", &BenchmarkRates::pass_with_test},
        {"R_SR", &BenchmarkRates::r_sr}}},
      {"dsr", {{"Pass@1(C')", &BenchmarkRates::pass_cprime}, {"R_DSR", &BenchmarkRates::r_dsr}}},
      {"br", {{"BR", &BenchmarkRates::br_rate}}}};

  std::vector<std::string> models, benches;
  for (const auto& row : rep.rates) {
    if (std::find(models.begin(), models.end(), row.model) == models.end()) models.push_back(row.model);
    if (row.rates.benchmark != "total" &&
        std::find(benches.begin(), benches.end(), row.rates.benchmark) == benches.end())
      benches.push_back(row.rates.benchmark);
  }
  std::sort(benches.begin(), benches.end());
  benches.push_back("total");

  auto find_rates = [&](const std::string& model, const std::string& b) -> const BenchmarkRates* {
    for (const auto& row : rep.rates)
      if (row.model == model && row.rates.benchmark == b) return &row.rates;
    return nullptr;
  };

  for (const auto& [task, cols] : sections) {
    std::vector<std::string> present;
    for (const auto& b : benches)
      for (const auto& m : models)
        if (auto r = find_rates(m, b); r && (r->*cols.back().field)) {
          if (std::find(present.begin(), present.end(), b) == present.end()) present.push_back(b);
        }
    if (present.empty()) continue;
    md << "\n## " << upper(task) << "\n\n| Model |";
    for (const auto& b : present)
      for (const auto& c : cols) md << ' ' << b << (cols.size() > 1 ? std::string(" ") + c.title : "") << " |";
    md << "\n|---|";
    for (std::size_t i = 0; i < present.size() * cols.size(); ++i) md << "---:|";
    md << "\n";
    for (const auto& m : models) {
      md << "| " << m << " |";
      for (const auto& b : present) {
        auto r = find_rates(m, b);
        for (const auto& c : cols) {
          const std::optional<double> none;
          const std::optional<double>& v = r ? r->*c.field : none;
          md << ' ' << (v ? format_percent(*v) + "%" : "-") << " |";
        }
      }
      md << "\n";
      // Correlation rows sit under their model, marked like the shaded rows
      // of the published tables; the value goes in the last column of each
      // benchmark group.
      for (const auto& metric : metric_names()) {
        bool any = false;
        std::ostringstream row;
        row << "| *ρ_" << upper(metric) << "* |";
        for (const auto& b : present) {
          const RhoRow* hit = nullptr;
          for (const auto& rr : rep.correlations)
            if (rr.model == m && rr.task == task && rr.benchmark == b && rr.metric == metric) hit = &rr;
          if (hit) any = true;
          for (std::size_t i = 0; i + 1 < cols.size(); ++i) row << " |";
          std::string cell = !hit ? "-" : hit->rho.rho ? "*" + format_fixed2(*hit->rho.rho) + "*" : "n/a";
          row << ' ' << cell << " |";
        }
        if (any) md << row.str() << "\n";
      }
    }
  }

  bool no_profiles = !rep.correlations.empty() &&
                     std::all_of(rep.correlations.begin(), rep.correlations.end(),
                                 [](const RhoRow& r) { return r.rho.unavailable == "no complexity profiles"; });
  if (no_profiles) md << "\nCorrelation rows are unavailable: no complexity profiles were supplied.\n";
  bool notes = no_profiles;
  for (const auto& rr : rep.correlations) {
    if (rr.rho.rho || rr.rho.unavailable.empty()) continue;
    if (!notes) md << "\nUnavailable correlations:\n\n";
    notes = true;
    md << "- " << rr.model << ' ' << upper(rr.task) << ' ' << rr.benchmark << " ρ_" << upper(rr.metric) << ": "
       << rr.rho.unavailable << "\n";
  }

  if (!rep.overlaps.empty()) {
    md << "\n## Overlap\n\n| Model | Sets | Region | Programs | Share |\n|---|---|---|---:|---:|\n";
    for (const auto& row : rep.overlaps)
      for (const auto& [sig, n] : row.partition.region_counts)
        md << "| " << row.model << " | " << row.label << " | " << sig << " | " << n << " | "
           << (row.partition.universe ? format_percent(double(n) / double(row.partition.universe)) + "%" : "-")
           << " |\n";
  }

  if (!rep.external.empty()) {
    md << "\n## External comparison\n\n| Model | Source | Common | Ours | Theirs |\n|---|---|---:|---:|---:|\n";
    for (const auto& row : rep.external) {
      auto rate = [&](std::size_t k) {
        return row.common ? format_percent(double(k) / double(row.common)) + "%" : std::string("-");
      };
      md << "| " << row.model << " | " << row.source << " | " << row.common << " | " << rate(row.ours) << " | "
         << rate(row.theirs) << " |\n";
    }
  }

  if (!rep.orphans.empty()) {
    md << "\n## Orphan ids\n\n| Source | Program | Reason |\n|---|---|---|\n";
    for (const auto& o : rep.orphans) md << "| " << o.source << " | " << o.program_id << " | " << o.reason << " |\n";
  }
  return md.str();
}

std::vector<std::filesystem::path> emit_report(const Report& report, ReportFormat format,
                                               const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> out;
  auto put = [&](const std::string& name, const std::string& content) {
    auto p = dir / name;
    write_file_atomic(p, content);
    out.push_back(p);
  };
  switch (format) {
    case ReportFormat::csv:
      for (const auto& [name, content] : report_to_csv(report)) put(name, content);
      break;
    case ReportFormat::json:
      put("report.json", report_to_json(report));
      break;
    case ReportFormat::markdown:
      put("report.md", report_to_markdown(report));
      break;
  }
  return out;
}

}  // namespace reasonbench
