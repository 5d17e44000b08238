#include "wheatai/export/csv.hpp"

#include <fstream>

#include <fmt/format.h>

#include "wheatai/error.hpp"

namespace wheatai::exporter {

namespace {

CsvSchema schema(std::string name, std::string_view header) {
    CsvSchema s{std::move(name), {}};
    std::size_t start = 0;
    while (start <= header.size()) {
        const std::size_t comma = header.find(',', start);
        const std::size_t end = comma == std::string_view::npos ? header.size() : comma;
        s.columns.emplace_back(header.substr(start, end - start));
        start = end + 1;
    }
    return s;
}

}  // namespace

const std::map<std::string, CsvSchema, std::less<>>& csv_schemas() {
    static const std::map<std::string, CsvSchema, std::less<>> schemas{
        {"spike", schema("spike", "image,plot_id,spike_count,spikes_per_m2")},
        {"spike-uav", schema("spike-uav", "image,plot_id,spike_count,spikes_per_m2")},
        {"spikelet", schema("spikelet", "image,plot_id,spike_index,spikelet_count")},
        {"fhb-single", schema("fhb-single", "image,plot_id,total_spikelets,diseased_spikelets,severity")},
        {"fhb-field", schema("fhb-field", "image,plot_id,spike_index,view,total_spikelets,diseased_spikelets,severity")},
        {"fdk", schema("fdk", "image,plot_id,total_kernels,damaged_kernels,fdk_ratio,area_weighted_ratio")},
        {"kernel-morph",
         schema("kernel-morph", "image,plot_id,kernel_index,category,length_mm,width_mm,area_mm2,mask_source")},
        {"stomata", schema("stomata", "image,plot_id,stoma_index,stoma_area_um2,pore_length_um,pore_width_um,"
                                      "pore_area_um2,aperture_ratio,open_flag")},
    };
    return schemas;
}

const std::map<std::string, CsvSchema, std::less<>>& csv_summary_schemas() {
    static const std::map<std::string, CsvSchema, std::less<>> schemas{
        {"spikelet", schema("spikelet_summary", "image,plot_id,unassigned_spikelets")},
        {"fhb-field", schema("fhb-field_summary", "image,plot_id,n_assessed,n_infected,incidence,"
                                                  "severity_infected,severity_all,fhb_index")},
        {"stomata", schema("stomata_summary",
                           "image,plot_id,stomata_count,fov_area_mm2,density_per_mm2,mean_aperture_ratio")},
    };
    return schemas;
}

std::string format_cell(const Cell& cell) {
    struct Visitor {
        std::string operator()(std::monostate) const { return {}; }
        std::string operator()(std::int64_t v) const { return fmt::format("{}", v); }
        std::string operator()(double v) const { return fmt::format("{:.6g}", v); }
        std::string operator()(bool v) const { return v ? "true" : "false"; }
        std::string operator()(const std::string& s) const {
            if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
            std::string out = "\"";
            for (char c : s) {
                if (c == '"') out += '"';
                out += c;
            }
            return out + '"';
        }
    };
    return std::visit(Visitor{}, cell);
}

std::string plot_id(std::string_view filename) {
    const std::size_t slash = filename.find_last_of("/\\");
    if (slash != std::string_view::npos) filename.remove_prefix(slash + 1);
    const std::size_t dot = filename.rfind('.');
    const std::string_view stem = dot == std::string_view::npos || dot == 0 ? filename : filename.substr(0, dot);
    return std::string(stem.substr(0, stem.find('_')));
}

std::string render_csv(const CsvSchema& schema, const std::vector<CsvRow>& rows) {
    std::string out = fmt::format("{}\n", fmt::join(schema.columns, ","));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != schema.columns.size()) {
            throw Error(ErrorCode::schema_mismatch,
                        fmt::format("{} row {} has {} fields, schema has {}", schema.name, r,
                                    rows[r].size(), schema.columns.size()));
        }
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            if (c > 0) out += ',';
            out += format_cell(rows[r][c]);
        }
        out += '\n';
    }
    return out;
}

std::size_t write_csv(const std::filesystem::path& path, const CsvSchema& schema,
                      const std::vector<CsvRow>& rows) {
    const std::string text = render_csv(schema, rows);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) {
        throw Error(ErrorCode::io_error, fmt::format("cannot write '{}'", path.string()));
    }
    return rows.size();
}

}  // namespace wheatai::exporter
