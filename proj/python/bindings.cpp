#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "pemsim/cost_model.hpp"
#include "pemsim/harness.hpp"
#include "pemsim/workload.hpp"

namespace py = pybind11;
using namespace pemsim;

namespace {

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::NotApplicable: return "na";
  }
  return "na";
}

const char* status_name(RowStatus s) {
  switch (s) {
    case RowStatus::Ok: return "ok";
    case RowStatus::Skipped: return "skipped";
    case RowStatus::Failed: return "failed";
  }
  return "failed";
}

py::dict estimate(const CostEstimate& e) {
  py::dict d;
  d["value"] = e.value;
  d["kind"] = e.kind == BoundKind::Upper ? "upper" : "lower";
  d["formula_id"] = e.formula_id;
  d["valid"] = e.valid;
  d["failed"] = e.failed;
  return d;
}

Layout layout_of(const std::string& name) {
  if (name == "mixed") return Layout::mixed();
  if (name == "column") return Layout::column();
  if (name == "row") return Layout::row();
  throw PemError(ErrorKind::Parse, "unknown layout " + name);
}

MapType map_of(const std::string& name) {
  if (name == "unordered") return MapType::Unordered;
  if (name == "sorted") return MapType::Sorted;
  if (name == "parallel_map") return MapType::ParallelMap;
  throw PemError(ErrorKind::Parse, "unknown map type " + name);
}

LowerLayout lower_layout_of(const std::string& name) {
  if (name == "mixed") return LowerLayout::MixedColumn;
  if (name == "column") return LowerLayout::ColumnMajor;
  if (name == "best") return LowerLayout::BestCase;
  throw PemError(ErrorKind::Parse, "unknown lower-bound layout " + name);
}

py::list triples_of(const std::vector<Triple>& triples) {
  py::list out;
  for (const auto& t : triples) out.append(py::make_tuple(t.i, t.j, t.value, t.k, t.l));
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Parallel external memory simulator";

  static py::exception<PemError> error(m, "PemError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const PemError& e) {
      py::set_error(error, (std::string(to_string(e.kind())) + ": " + e.what()).c_str());
    }
  });

  py::class_<ShuffleInstance>(m, "Instance")
      .def_readonly("N_M", &ShuffleInstance::N_M)
      .def_readonly("N_R", &ShuffleInstance::N_R)
      .def_readonly("H", &ShuffleInstance::H)
      .def_readonly("v", &ShuffleInstance::v)
      .def_readonly("w", &ShuffleInstance::w)
      .def_readonly("seed", &ShuffleInstance::seed)
      .def_property_readonly("triples", [](const ShuffleInstance& s) { return triples_of(s.triples); },
                             "(i, j, value, k, l) in layout order");

  m.def(
      "generate",
      [](std::int64_t N_M, std::int64_t N_R, std::int64_t H, std::int32_t v, std::int32_t w,
         const std::string& layout, std::uint64_t seed) {
        GenerateParams g;
        g.N_M = N_M;
        g.N_R = N_R;
        g.H = H;
        g.v = v;
        g.w = w;
        g.layout = layout_of(layout);
        g.seed = seed;
        return generate(g);
      },
      py::arg("N_M"), py::arg("N_R"), py::arg("H"), py::arg("v") = 1, py::arg("w") = 1, py::arg("layout") = "mixed",
      py::arg("seed") = 0);
  m.def("oracle_shuffle", [](const ShuffleInstance& s) { return triples_of(oracle_shuffle(s)); },
        "Triples in row-major order.");

  py::class_<Params>(m, "Params")
      .def(py::init([](double N_M, double N_R, double H, double v, double w, double P, double M, double B,
                       double eps) {
             return Params{N_M, N_R, H, v, w, P, M, B, eps};
           }),
           py::kw_only(), py::arg("N_M"), py::arg("N_R"), py::arg("H"), py::arg("v") = 1, py::arg("w") = 1,
           py::arg("P") = 1, py::arg("M"), py::arg("B"), py::arg("eps") = 0.5)
      .def_readwrite("N_M", &Params::N_M)
      .def_readwrite("N_R", &Params::N_R)
      .def_readwrite("H", &Params::H)
      .def_readwrite("v", &Params::v)
      .def_readwrite("w", &Params::w)
      .def_readwrite("P", &Params::P)
      .def_readwrite("M", &Params::M)
      .def_readwrite("B", &Params::B)
      .def_readwrite("eps", &Params::eps)
      .def("d", &Params::d)
      .def("scan", &Params::scan);

  m.def(
      "upper_bound",
      [](const Params& p, const std::string& map, bool parallel_reduce) {
        return estimate(table1_upper(p, map_of(map), parallel_reduce ? ReduceType::Parallel : ReduceType::NonParallel));
      },
      py::arg("params"), py::arg("map") = "unordered", py::arg("parallel_reduce") = true);
  m.def(
      "lower_bound",
      [](const Params& p, const std::string& which, const std::string& layout) {
        if (which == "thm1") return estimate(thm1_lower(p, lower_layout_of(layout)));
        if (which == "lemma2") return estimate(lemma2_lower(p));
        if (which == "transpose") return estimate(transpose_lower(p));
        if (which == "combined") return estimate(combined_lower(p, lower_layout_of(layout)));
        throw PemError(ErrorKind::Parse, "unknown lower bound " + which);
      },
      py::arg("params"), py::arg("which") = "thm1", py::arg("layout") = "mixed");

  m.def("algorithm_names", &algorithm_names);
  m.def(
      "run_point",
      [](const std::string& alg, std::int64_t N_M, std::int64_t N_R, std::int64_t H, std::int64_t v, std::int64_t w,
         std::size_t P, std::size_t M, std::size_t B, std::uint64_t seed, bool potential) {
        ReportRow r;
        {
          py::gil_scoped_release release;
          r = run_point(alg, N_M, N_R, H, v, w, MachineConfig{P, M, B}, seed, potential);
        }
        py::dict d;
        d["status"] = status_name(r.status);
        d["reason"] = r.reason;
        d["measured"] = r.measured;
        d["leading"] = r.leading;
        d["lower"] = r.lower ? py::cast(*r.lower) : py::none();
        d["correct"] = verdict_name(r.correct);
        d["potential"] = verdict_name(r.potential);
        d["copy_steps"] = r.copy_steps;
        return d;
      },
      py::arg("algorithm"), py::arg("N_M"), py::arg("N_R"), py::arg("H"), py::arg("v") = 1, py::arg("w") = 1,
      py::arg("P") = 1, py::arg("M"), py::arg("B"), py::arg("seed") = 0, py::arg("potential") = true);
  m.def(
      "run_sweep",
      [](const std::string& spec_text) {
        std::istringstream in(spec_text);
        const auto spec = parse_spec(in);
        Report report;
        {
          py::gil_scoped_release release;
          report = run_sweep(spec);
        }
        std::ostringstream out;
        write_report(out, report);
        return out.str();
      },
      py::arg("spec"), "Runs a sweep described in the spec format and returns the CSV report.");
  m.def(
      "calibrate",
      [](const std::string& report_csv, std::size_t min_rows) {
        std::istringstream in(report_csv);
        py::dict out;
        for (const auto& [alg, c] : calibrate(read_report(in), min_rows)) out[py::str(alg)] = py::make_tuple(c.C1, c.C2);
        return out;
      },
      py::arg("report"), py::arg("min_rows") = 10, "Per-algorithm (C1, C2) from a CSV report.");
}
