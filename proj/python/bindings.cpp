#include "pags/config.hpp"
#include "pags/dataset.hpp"
#include "pags/metrics.hpp"
#include "pags/optimizer.hpp"
#include "pags/ply.hpp"
#include "pags/priority.hpp"
#include "pags/semantic.hpp"
#include "pags/synth.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace pags;

namespace {

using Image = py::array_t<double, py::array::c_style | py::array::forcecast>;

py::array_t<double> to_image(const std::vector<double>& rgb, int width, int height) {
    py::array_t<double> out({height, width, 3});
    std::copy(rgb.begin(), rgb.end(), out.mutable_data());
    return out;
}

std::vector<double> from_image(const Image& img, int& width, int& height) {
    if (img.ndim() != 3 || img.shape(2) != 3) throw DimensionError("expected an H x W x 3 array");
    height = static_cast<int>(img.shape(0));
    width = static_cast<int>(img.shape(1));
    return {img.data(), img.data() + img.size()};
}

py::dict stats_dict(const RenderStats& s) {
    py::dict d;
    d["fragments_binned"] = s.fragments_binned;
    d["fragments_shaded"] = s.fragments_shaded;
    d["fragments_culled_earlyz"] = s.fragments_culled_earlyz;
    d["occluders"] = s.occluders;
    d["prepass_ms"] = s.prepass_ms;
    d["colorpass_ms"] = s.colorpass_ms;
    return d;
}

py::dict report_dict(const MetricsReport& r) {
    py::dict d;
    d["psnr_global"] = r.psnr_global;
    d["psnr_critical"] = r.psnr_critical;
    d["psnr_noncritical"] = r.psnr_noncritical;
    d["ssim"] = r.ssim;
    d["pixels_global"] = r.pixels_global;
    d["pixels_critical"] = r.pixels_critical;
    d["pixels_noncritical"] = r.pixels_noncritical;
    return d;
}

RunConfig run_config(const std::map<std::string, std::string>& options) {
    RunConfig rc;
    rc.apply(options);
    return rc;
}

py::array_t<double> world_column(const SceneModel& scene, double time, int field) {
    const auto world = compose_world(scene, time);
    const py::ssize_t cols = field == 0 ? 3 : 1;
    py::array_t<double> out(std::vector<py::ssize_t>{static_cast<py::ssize_t>(world.size()), cols});
    auto* p = out.mutable_data();
    for (const auto& g : world) {
        if (field == 0) {
            for (int k = 0; k < 3; ++k) *p++ = g.mean[k];
        } else if (field == 1) {
            *p++ = g.s_sem;
        } else {
            *p++ = g.opacity();
        }
    }
    if (field != 0) out = out.reshape({static_cast<py::ssize_t>(world.size())});
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Gaussian splatting core: scenes, rasterizer, optimizer, depth pre-pass renderer";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<ParseError>(m, "ParseError", base.ptr());
    py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
    py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

    m.def("hybrid_score", &hybrid_score, py::arg("s_sem"), py::arg("s_grad"), py::arg("alpha"));
    m.def("dropout_probability", &dropout_probability, py::arg("s_sem"), py::arg("t"), py::arg("t_total"),
          py::arg("beta"), py::arg("gamma"));
    m.def("compensation_factor", &compensation_factor, py::arg("drop_probability"));

    py::class_<CameraView>(m, "Camera")
        .def_static(
            "look_at",
            [](std::array<double, 3> eye, std::array<double, 3> target, int width, int height, double focal,
               std::array<double, 3> up) {
                Intrinsics in;
                in.width = width;
                in.height = height;
                in.fx = in.fy = focal;
                in.cx = 0.5 * width;
                in.cy = 0.5 * height;
                return CameraView::look_at(Vec3(eye[0], eye[1], eye[2]), Vec3(target[0], target[1], target[2]),
                                           Vec3(up[0], up[1], up[2]), in);
            },
            py::arg("eye"), py::arg("target"), py::arg("width"), py::arg("height"), py::arg("focal"),
            py::arg("up") = std::array<double, 3>{0.0, -1.0, 0.0})
        .def_readwrite("view_id", &CameraView::view_id)
        .def_readwrite("timestamp", &CameraView::timestamp)
        .def_property_readonly("width", &CameraView::width)
        .def_property_readonly("height", &CameraView::height)
        .def_property_readonly("center",
                               [](const CameraView& c) {
                                   const Vec3 p = c.camera_center();
                                   return std::array<double, 3>{p[0], p[1], p[2]};
                               })
        .def_property(
            "image",
            [](const CameraView& c) -> py::object {
                if (!c.gt_image) return py::none();
                return to_image(*c.gt_image, c.width(), c.height());
            },
            [](CameraView& c, const Image& img) {
                int w = 0, h = 0;
                auto data = from_image(img, w, h);
                if (w != c.width() || h != c.height()) throw DimensionError("image does not match the camera");
                c.gt_image = std::move(data);
            })
        .def_property_readonly("mask", [](const CameraView& c) -> py::object {
            if (!c.semantic_mask) return py::none();
            py::array_t<std::int32_t> out({c.height(), c.width()});
            std::copy(c.semantic_mask->begin(), c.semantic_mask->end(), out.mutable_data());
            return out;
        });

    py::class_<SceneModel>(m, "Scene")
        .def_static("load", &load_ply, py::arg("path"))
        .def_static("from_bytes", [](const py::bytes& b) { return decode_ply(std::string(b)); })
        .def(
            "save",
            [](const SceneModel& s, const std::string& path, bool single) {
                save_ply(s, path, single ? PlyPrecision::Float : PlyPrecision::Double);
            },
            py::arg("path"), py::arg("float32") = false)
        .def("to_bytes", [](const SceneModel& s) { return py::bytes(encode_ply(s)); })
        .def_property_readonly("gaussian_count", &SceneModel::gaussian_count)
        .def("__len__", &SceneModel::gaussian_count)
        .def("means", [](const SceneModel& s, double t) { return world_column(s, t, 0); }, py::arg("time") = 0.0)
        .def("s_sem", [](const SceneModel& s) { return world_column(s, 0.0, 1); })
        .def("opacities", [](const SceneModel& s) { return world_column(s, 0.0, 2); });

    m.def("load_views", [](const std::string& path) { return load_dataset(path).views; }, py::arg("path"));

    m.def(
        "synth_scene",
        [](const std::string& layout, std::uint64_t seed, int count, int size, int views, bool render_gt) {
            SynthOptions o;
            o.layout = layout;
            o.seed = seed;
            o.count = count;
            o.size = size;
            o.views = views;
            o.render_gt = render_gt;
            SynthScene s = synth_scene(o);
            return py::make_tuple(std::move(s.scene), std::move(s.views), s.labels);
        },
        py::arg("layout") = "street-toy", py::arg("seed") = 7, py::arg("count") = 200, py::arg("size") = 0,
        py::arg("views") = 0, py::arg("render_gt") = true,
        "Returns (ground-truth scene, cameras with images and masks, {gaussian id: label}).");
    m.def("perturbed_init", &perturbed_init, py::arg("truth"), py::arg("seed"), py::arg("position_noise") = 0.05);

    m.def(
        "score",
        [](SceneModel& scene, const std::vector<CameraView>& views) {
            const auto masks = masks_from_views(views);
            const auto scores =
                compute_semantic_scores(scene, views, masks, SemanticClassTable::defaults());
            apply_semantic_scores(scene, scores);
            return world_column(scene, 0.0, 1);
        },
        py::arg("scene"), py::arg("views"), "Writes semantic scores into the scene and returns them.");

    m.def(
        "render",
        [](const SceneModel& scene, const CameraView& cam, bool pdr, const std::map<std::string, std::string>& opts) {
            const RunConfig rc = run_config(opts);
            PriorityRender r;
            {
                py::gil_scoped_release release;
                r = pdr ? render_priority(scene, cam, rc.priority) : render_single_pass(scene, cam, rc.priority);
            }
            return py::make_tuple(to_image(r.target.color, cam.width(), cam.height()), stats_dict(r.stats));
        },
        py::arg("scene"), py::arg("camera"), py::arg("pdr") = false,
        py::arg("options") = std::map<std::string, std::string>{},
        "Returns (H x W x 3 image, render statistics).");

    m.def(
        "train",
        [](const SceneModel& scene, const std::vector<CameraView>& views,
           const std::map<std::string, std::string>& opts) {
            const RunConfig rc = run_config(opts);
            const TrainConfig tc = rc.effective_train();
            py::gil_scoped_release release;
            return train(scene, views, tc).scene;
        },
        py::arg("scene"), py::arg("views"), py::arg("options") = std::map<std::string, std::string>{},
        "Runs the training loop; options are config keys as strings.");

    m.def(
        "psnr",
        [](const Image& a, const Image& b) {
            int w = 0, h = 0, w2 = 0, h2 = 0;
            return psnr(from_image(a, w, h), from_image(b, w2, h2));
        },
        py::arg("a"), py::arg("b"));
    m.def(
        "ssim",
        [](const Image& a, const Image& b) {
            int w = 0, h = 0, w2 = 0, h2 = 0;
            const auto va = from_image(a, w, h), vb = from_image(b, w2, h2);
            return ssim(va, vb, w, h);
        },
        py::arg("a"), py::arg("b"));
    m.def(
        "compare",
        [](const Image& a, const Image& b, std::optional<py::array_t<std::uint8_t, py::array::c_style |
                                                                                     py::array::forcecast>> mask) {
            int w = 0, h = 0, w2 = 0, h2 = 0;
            const auto va = from_image(a, w, h), vb = from_image(b, w2, h2);
            std::vector<std::uint8_t> crit;
            if (mask) crit.assign(mask->data(), mask->data() + mask->size());
            return report_dict(compare_images(va, vb, w, h, crit));
        },
        py::arg("a"), py::arg("b"), py::arg("critical_mask") = py::none());
}
