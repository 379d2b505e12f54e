#include "pplqa/report.hpp"

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>

#include <fmt/format.h>
#include <unistd.h>

#include "pplqa/error.hpp"

namespace pplqa {
namespace {

std::string number(double value, int digits = 4) { return fmt::format("{:.{}f}", value, digits); }

std::string csv_preamble(const ReportHeader& h) {
    std::string out = fmt::format("# command: {}\n# config_hash: {}\n# seed: {}\n", h.command, h.config_hash, h.seed);
    for (const auto& [key, value] : h.notes) out += fmt::format("# {}: {}\n", key, value);
    return out;
}

std::string markdown_preamble(const ReportHeader& h, std::string_view title) {
    std::string out = fmt::format("## {}\n\nconfig_hash `{}`, seed {}", title, h.config_hash, h.seed);
    for (const auto& [key, value] : h.notes) out += fmt::format(", {} {}", key, value);
    return out + "\n\n";
}

std::string cell(std::string_view text) {
    std::string out;
    for (const char c : text) {
        if (c == '|') out += '\\';
        out += c == '\n' ? ' ' : c;
    }
    return out;
}

std::string row(const std::vector<std::string>& cells) {
    std::string out = "|";
    for (const auto& c : cells) out += " " + cell(c) + " |";
    return out + "\n";
}

std::string rule(std::size_t columns) {
    std::string out = "|";
    for (std::size_t i = 0; i < columns; ++i) out += i < 2 ? " --- |" : " ---: |";
    return out + "\n";
}

template <class T, class Key>
std::vector<std::string> distinct(std::span<const T> items, Key key) {
    std::vector<std::string> out;
    for (const auto& item : items) {
        const std::string& k = key(item);
        if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
    }
    return out;
}

std::string pair_label(const ConsistencyCell& c) { return c.first + " vs " + c.second; }

}  // namespace

std::string csv_field(std::string_view text) {
    if (text.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(text);
    std::string out = "\"";
    for (const char c : text) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string scores_csv(const ReportHeader& header, std::span<const ScoreRecord> records) {
    std::string out = csv_preamble(header);
    out += "question_id,model_id,scorer,template,direction,value,ppl_qa,ppl_a,provider\n";
    for (const auto& r : records) {
        std::string ppl_qa;
        std::string ppl_a;
        for (const auto& [name, value] : r.components) {
            if (name == "ppl_qa") ppl_qa = fmt::format("{:.10g}", value);
            if (name == "ppl_a") ppl_a = fmt::format("{:.10g}", value);
        }
        out += fmt::format("{},{},{},{},{},{:.10g},{},{},{}\n", csv_field(r.question_id), csv_field(r.model_id),
                           csv_field(r.scorer), csv_field(r.template_name), to_string(r.direction), r.value, ppl_qa,
                           ppl_a, csv_field(r.provider));
    }
    return out;
}

std::string metrics_csv(const ReportHeader& header, std::span<const MetricsReport> reports) {
    std::string out = csv_preamble(header);
    out += "group,scorer,tp,fp,fn,tn,ties,errors,decided,precision_0,recall_0,f1_0,precision_1,recall_1,f1_1,"
           "accuracy,mcc\n";
    for (const auto& r : reports) {
        out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", csv_field(r.group),
                           csv_field(r.scorer), r.counts.tp, r.counts.fp, r.counts.fn, r.counts.tn, r.ties(),
                           r.errors, r.decided(), number(r.label0.precision), number(r.label0.recall),
                           number(r.label0.f1), number(r.label1.precision), number(r.label1.recall),
                           number(r.label1.f1), number(r.accuracy), number(r.mcc));
    }
    return out;
}

std::string metrics_markdown(const ReportHeader& header, std::span<const MetricsReport> reports) {
    const auto groups = distinct(reports, [](const MetricsReport& r) -> const std::string& { return r.group; });
    const auto scorers = distinct(reports, [](const MetricsReport& r) -> const std::string& { return r.scorer; });
    std::string out = markdown_preamble(header, "Pairwise comparison");
    std::vector<std::string> head{"Domain", "Metric"};
    head.insert(head.end(), scorers.begin(), scorers.end());
    out += row(head) + rule(head.size());

    using Getter = std::string (*)(const MetricsReport&);
    const std::vector<std::pair<std::string, Getter>> metrics = {
        {"Precision", [](const MetricsReport& r) { return number(r.label0.precision, 2) + ", " + number(r.label1.precision, 2); }},
        {"Recall", [](const MetricsReport& r) { return number(r.label0.recall, 2) + ", " + number(r.label1.recall, 2); }},
        {"F1", [](const MetricsReport& r) { return number(r.label0.f1, 2) + ", " + number(r.label1.f1, 2); }},
        {"Accuracy", [](const MetricsReport& r) { return number(r.accuracy, 2); }},
        {"MCC", [](const MetricsReport& r) { return number(r.mcc, 3); }},
        {"Decided / ties / errors",
         [](const MetricsReport& r) { return fmt::format("{} / {} / {}", r.decided(), r.ties(), r.errors); }},
    };
    for (const auto& group : groups) {
        bool first = true;
        for (const auto& [name, get] : metrics) {
            std::vector<std::string> cells{first ? group : "", name};
            first = false;
            for (const auto& scorer : scorers) {
                const auto it = std::find_if(reports.begin(), reports.end(), [&](const MetricsReport& r) {
                    return r.group == group && r.scorer == scorer;
                });
                cells.push_back(it == reports.end() || it->empty ? "--" : get(*it));
            }
            out += row(cells);
        }
    }
    return out;
}

std::string tau_csv(const ReportHeader& header, std::span<const TauGroup> groups) {
    std::string out = csv_preamble(header);
    out += "group,first,second,mean_tau,p_value,n_questions\n";
    for (const auto& g : groups) {
        for (const auto& c : g.cells) {
            out += fmt::format("{},{},{},{},{},{}\n", csv_field(g.group), csv_field(c.first), csv_field(c.second),
                               number(c.summary.mean_tau), number(c.summary.p_value), c.summary.n_questions);
        }
    }
    return out;
}

std::string tau_markdown(const ReportHeader& header, std::span<const TauGroup> groups) {
    std::vector<std::string> pairs;
    for (const auto& g : groups) {
        for (const auto& c : g.cells) {
            if (std::find(pairs.begin(), pairs.end(), pair_label(c)) == pairs.end()) pairs.push_back(pair_label(c));
        }
    }
    std::string out = markdown_preamble(header, "Kendall tau between evaluators");
    std::vector<std::string> head{"Domain", ""};
    head.insert(head.end(), pairs.begin(), pairs.end());
    out += row(head) + rule(head.size());
    for (const auto& g : groups) {
        std::vector<std::string> tau_row{g.group, "tau"};
        std::vector<std::string> p_row{"", "p"};
        for (const auto& pair : pairs) {
            const auto it = std::find_if(g.cells.begin(), g.cells.end(),
                                         [&](const ConsistencyCell& c) { return pair_label(c) == pair; });
            tau_row.push_back(it == g.cells.end() ? "--" : number(it->summary.mean_tau, 3));
            p_row.push_back(it == g.cells.end() ? "--" : number(it->summary.p_value, 2));
        }
        out += row(tau_row) + row(p_row);
    }
    return out;
}

std::string lengthcorr_csv(const ReportHeader& header, std::span<const LengthCorrelation> rows) {
    std::string out = csv_preamble(header);
    out += "model,domain,points,r\n";
    for (const auto& r : rows) {
        out += fmt::format("{},{},{},{}\n", csv_field(r.model_id), csv_field(r.domain.empty() ? "all" : r.domain),
                           r.points, r.r ? number(*r.r) : std::string("NA"));
    }
    return out;
}

std::string lengthcorr_markdown(const ReportHeader& header, std::span<const LengthCorrelation> rows) {
    const auto models = distinct(rows, [](const LengthCorrelation& r) -> const std::string& { return r.model_id; });
    const auto domains = distinct(rows, [](const LengthCorrelation& r) -> const std::string& { return r.domain; });
    std::string out = markdown_preamble(header, "Perplexity vs response length (Pearson r)");
    std::vector<std::string> head{"Model"};
    for (const auto& d : domains) head.push_back(d.empty() ? "All" : d);
    out += row(head);
    out += "| --- |";
    for (std::size_t i = 0; i < domains.size(); ++i) out += " ---: |";
    out += "\n";
    for (const auto& model : models) {
        std::vector<std::string> cells{model};
        for (const auto& d : domains) {
            const auto it = std::find_if(rows.begin(), rows.end(), [&](const LengthCorrelation& r) {
                return r.model_id == model && r.domain == d;
            });
            cells.push_back(it == rows.end() || !it->r ? "--" : number(*it->r, 3));
        }
        out += row(cells);
    }
    return out;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto temp = path;
    temp += fmt::format(".tmp-{}", ::getpid());
    {
        std::ofstream out(temp, std::ios::binary | std::ios::trunc);
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw UsageError(fmt::format("cannot write {}: {}", temp.string(), std::strerror(errno)));
    }
    std::error_code ec;
    std::filesystem::rename(temp, path, ec);
    if (ec) {
        std::filesystem::remove(temp, ec);
        throw UsageError(fmt::format("cannot write {}", path.string()));
    }
}

}  // namespace pplqa
