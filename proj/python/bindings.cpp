#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include "sfreq/metrics.hpp"
#include "sfreq/networks.hpp"
#include "sfreq/serialize.hpp"
#include "sfreq/signal_model.hpp"
#include "sfreq/spectral_estimators.hpp"

namespace py = pybind11;
using namespace sfreq;

namespace {

py::array_t<double> real_array(const std::vector<double>& v) {
    py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

py::array_t<cplx> complex_array(const std::vector<cplx>& v) {
    py::array_t<cplx> out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

// Shared ownership lets forward() bind the model without copying megabytes of
// weights into every call.
struct FrHandle {
    std::shared_ptr<LoadedFrModel> loaded;
};

struct CounterHandle {
    std::shared_ptr<LoadedCounterModel> loaded;
};

py::dict meta_dict(const TrainMeta& meta) {
    py::dict d;
    d["seed"] = meta.seed;
    d["epochs"] = meta.epochs;
    d["final_train_loss"] = meta.final_train_loss;
    d["best_val_loss"] = meta.best_val_loss;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Multisinusoid frequency estimation: signal model, classical "
              "spectral estimators, learned representations, and metrics.";
    m.attr("__version__") = SFREQ_VERSION;

    py::enum_<DistanceMode>(m, "DistanceMode")
        .value("WRAP", DistanceMode::Wrap)
        .value("PLAIN", DistanceMode::Plain);

    py::class_<SinusoidMixture>(m, "SinusoidMixture")
        .def(py::init([](std::vector<double> freqs, std::vector<cplx> amps) {
                 SinusoidMixture mix;
                 mix.frequencies = std::move(freqs);
                 mix.amplitudes = std::move(amps);
                 if (mix.frequencies.size() != mix.amplitudes.size())
                     throw std::invalid_argument(
                         "mixture: frequency and amplitude lists differ in length");
                 return mix;
             }),
             py::arg("frequencies"), py::arg("amplitudes"))
        .def_property_readonly(
            "frequencies",
            [](const SinusoidMixture& mix) { return real_array(mix.frequencies); })
        .def_property_readonly(
            "amplitudes",
            [](const SinusoidMixture& mix) { return complex_array(mix.amplitudes); })
        .def_property_readonly("count", &SinusoidMixture::count);

    py::class_<SampleRecord>(m, "SampleRecord")
        .def_readonly("truth", &SampleRecord::truth)
        .def_property_readonly(
            "clean", [](const SampleRecord& r) { return complex_array(r.clean); })
        .def_property_readonly(
            "noisy", [](const SampleRecord& r) { return complex_array(r.noisy); })
        .def_readonly("sigma", &SampleRecord::sigma)
        .def_property_readonly("n_samples", &SampleRecord::n_samples);

    py::class_<GeneratorConfig>(m, "GeneratorConfig")
        .def(py::init<>())
        .def_static("for_n", &GeneratorConfig::for_n, py::arg("n"))
        .def_readwrite("n_samples", &GeneratorConfig::n_samples)
        .def_readwrite("m_max", &GeneratorConfig::m_max)
        .def_readwrite("sep_floor", &GeneratorConfig::sep_floor)
        .def_readwrite("sep_spread_std", &GeneratorConfig::sep_spread_std)
        .def_readwrite("amp_floor", &GeneratorConfig::amp_floor)
        .def_readwrite("sigma_min", &GeneratorConfig::sigma_min)
        .def_readwrite("sigma_max", &GeneratorConfig::sigma_max)
        .def_readwrite("seed", &GeneratorConfig::seed)
        .def_readwrite("distance", &GeneratorConfig::distance);

    py::class_<Grid>(m, "Grid")
        .def(py::init([](int size) {
                 Grid g;
                 g.size = size;
                 return g;
             }),
             py::arg("size"))
        .def_readonly("size", &Grid::size)
        .def("point", &Grid::point, py::arg("g"))
        .def("spacing", &Grid::spacing)
        .def("points", [](const Grid& g) { return real_array(g.points()); });

    py::class_<FreqRepresentation>(m, "FreqRepresentation")
        .def(py::init([](std::vector<double> values) {
                 FreqRepresentation fr;
                 fr.grid.size = static_cast<int>(values.size());
                 fr.values = std::move(values);
                 return fr;
             }),
             py::arg("values"))
        .def_property_readonly(
            "values", [](const FreqRepresentation& fr) { return real_array(fr.values); })
        .def_property_readonly("grid",
                               [](const FreqRepresentation& fr) { return fr.grid.size; })
        .def("points",
             [](const FreqRepresentation& fr) { return real_array(fr.grid.points()); });

    py::class_<PeakList>(m, "PeakList")
        .def_property_readonly(
            "frequencies", [](const PeakList& p) { return real_array(p.frequencies); })
        .def_readonly("degenerate", &PeakList::degenerate);

    py::class_<CovarianceEstimate>(m, "CovarianceEstimate")
        .def_readonly("window", &CovarianceEstimate::window)
        .def_readonly("snapshots", &CovarianceEstimate::snapshots)
        .def_property_readonly("eigenvalues", [](const CovarianceEstimate& c) {
            return real_array(c.eigenvalues);
        });

    m.def("synthesize",
          [](const SinusoidMixture& mix, int n) { return complex_array(synthesize(mix, n)); },
          py::arg("mixture"), py::arg("n"));
    m.def("dtft", &dtft, py::arg("samples"), py::arg("f"));
    m.def("dirichlet_kernel", &dirichlet_kernel, py::arg("f"), py::arg("n"));
    m.def("snr_db", &snr_db, py::arg("sigma"));
    m.def("wrap_distance", &wrap_distance, py::arg("a"), py::arg("b"));
    m.def("detection_radius", &detection_radius, py::arg("n_samples"));

    m.def("generate_record", &generate_record, py::arg("config"), py::arg("record_index"));
    m.def("generate_records", &generate_records, py::arg("config"), py::arg("count"),
          py::arg("threads") = 1);
    m.def("ground_truth_fr",
          [](const SinusoidMixture& mix, int grid, double kernel_std, DistanceMode mode) {
              return ground_truth_fr(mix, Grid{grid}, kernel_std, mode);
          },
          py::arg("mixture"), py::arg("grid"), py::arg("kernel_std"),
          py::arg("mode") = DistanceMode::Wrap);

    m.def("periodogram",
          [](const std::vector<cplx>& samples, int grid) {
              return periodogram(samples, Grid{grid});
          },
          py::arg("samples"), py::arg("grid") = 1000);
    m.def("build_covariance", &build_covariance, py::arg("samples"), py::arg("window"));
    m.def("music_pseudospectrum",
          [](const CovarianceEstimate& cov, int m_components, int grid) {
              return music_pseudospectrum(cov, m_components, Grid{grid});
          },
          py::arg("covariance"), py::arg("m"), py::arg("grid") = 1000);
    m.def("music",
          [](const std::vector<cplx>& samples, int m_components, int window, int grid) {
              return music_pseudospectrum(build_covariance(samples, window), m_components,
                                          Grid{grid});
          },
          py::arg("samples"), py::arg("m"), py::arg("window") = 25, py::arg("grid") = 1000);
    m.def("aic_order", &aic_order, py::arg("covariance"));
    m.def("mdl_order", &mdl_order, py::arg("covariance"));
    m.def("sorte_order", &sorte_order, py::arg("covariance"));
    m.def("pick_peaks", &pick_peaks, py::arg("fr"), py::arg("count"));

    m.def("missed_count", &missed_count, py::arg("truth"), py::arg("estimates"),
          py::arg("n_samples"), py::arg("mode") = DistanceMode::Wrap);
    m.def("fnr", &fnr, py::arg("truth"), py::arg("estimates"), py::arg("n_samples"),
          py::arg("mode") = DistanceMode::Wrap);
    m.def("chamfer", &chamfer, py::arg("a"), py::arg("b"),
          py::arg("mode") = DistanceMode::Wrap);
    m.def("counting_error", &counting_error, py::arg("truth_counts"),
          py::arg("estimated_counts"));

    py::class_<FrHandle>(m, "FrModel")
        .def("forward",
             [](FrHandle& h, const std::vector<cplx>& samples) {
                 return fr_forward(h.loaded->model, samples);
             },
             py::arg("samples"))
        .def_property_readonly(
            "variant", [](const FrHandle& h) { return h.loaded->model.config.variant; })
        .def_property_readonly(
            "n_samples", [](const FrHandle& h) { return h.loaded->model.config.n_samples; })
        .def_property_readonly(
            "grid", [](const FrHandle& h) { return h.loaded->model.config.grid; })
        .def_property_readonly(
            "parameter_count",
            [](const FrHandle& h) { return h.loaded->model.parameter_count(); })
        .def_property_readonly("meta",
                               [](const FrHandle& h) { return meta_dict(h.loaded->meta); });

    py::class_<CounterHandle>(m, "CounterModel")
        .def("count",
             [](CounterHandle& h, const FreqRepresentation& fr) {
                 return count_components(h.loaded->model, fr);
             },
             py::arg("fr"))
        .def("raw",
             [](CounterHandle& h, const FreqRepresentation& fr) {
                 return counter_forward(h.loaded->model, fr.values);
             },
             py::arg("fr"))
        .def_property_readonly(
            "grid", [](const CounterHandle& h) { return h.loaded->model.config.grid; })
        .def_property_readonly(
            "m_max", [](const CounterHandle& h) { return h.loaded->model.config.m_max; })
        .def_property_readonly(
            "parameter_count",
            [](const CounterHandle& h) { return h.loaded->model.parameter_count(); })
        .def_property_readonly(
            "meta", [](const CounterHandle& h) { return meta_dict(h.loaded->meta); });

    m.def("load_fr_model",
          [](const std::string& path) {
              return FrHandle{std::make_shared<LoadedFrModel>(load_fr_model(path))};
          },
          py::arg("path"));
    m.def("load_counter_model",
          [](const std::string& path) {
              return CounterHandle{std::make_shared<LoadedCounterModel>(load_counter_model(path))};
          },
          py::arg("path"));

    py::class_<Dataset>(m, "Dataset")
        .def_readonly("config", &Dataset::config)
        .def_readonly("records", &Dataset::records)
        .def("__len__", [](const Dataset& ds) { return ds.records.size(); });
    m.def("load_dataset", &load_dataset, py::arg("path"));

    py::register_exception<IntegrityError>(m, "IntegrityError", PyExc_ValueError);
}
