"use strict";
/**
 * Editor-agnostic analysis plumbing: debounced latest-wins scheduling,
 * payload-to-diagnostic mapping, hover rendering, and quick-fix lookup.
 *
 * The extension entry point adapts this onto the VS Code API; tests drive
 * it against a fake host and a stub service.  All line numbers here stay
 * 1-based (service coordinates); the VS Code layer converts.
 */
Object.defineProperty(exports, "__esModule", { value: true });
exports.AnalysisController = void 0;
exports.severityOf = severityOf;
exports.toEditorDiagnostics = toEditorDiagnostics;
exports.hoverMarkdown = hoverMarkdown;
const client_1 = require("./client");
function severityOf(band) {
    switch (band) {
        case 'Critical':
        case 'High':
            return 'error';
        case 'Medium':
            return 'warning';
        default:
            return 'info';
    }
}
function toEditorDiagnostics(payloads) {
    return payloads.map((p) => ({
        line: p.top_lines[0],
        severity: severityOf(p.band),
        message: `${p.cwe_id} (${p.cwe_type}): ${p.description} ` +
            `[severity ${p.cvss.toFixed(1)} ${p.band}]`,
        payload: p,
    }));
}
function hoverMarkdown(diag) {
    const p = diag.payload;
    const lines = [
        `**${p.cwe_id}** (${p.cwe_type}) — ${p.description}`,
        '',
        `CVSS **${p.cvss.toFixed(1)}** (${p.band}), ` +
            `detector confidence ${(p.p_vulnerable * 100).toFixed(0)}%`,
        '',
        `[CWE reference](${p.url})`,
    ];
    if (p.repair) {
        lines.push('', `Quick fix available for line ${p.repair.target_line}.`);
    }
    return lines.join('\n');
}
class AnalysisController {
    host;
    client;
    debounceMs;
    state = new Map();
    published = new Map();
    constructor(host, client, debounceMs = 500) {
        this.host = host;
        this.client = client;
        this.debounceMs = debounceMs;
    }
    /** Debounced entry point for open/edit events; latest edit wins. */
    documentChanged(uri, getText) {
        const st = this.ensure(uri);
        if (st.timer !== null) {
            clearTimeout(st.timer);
        }
        st.timer = setTimeout(() => {
            st.timer = null;
            void this.analyzeNow(uri, getText());
        }, this.debounceMs);
    }
    documentClosed(uri) {
        const st = this.state.get(uri);
        if (st?.timer) {
            clearTimeout(st.timer);
        }
        this.state.delete(uri);
        this.published.delete(uri);
        this.host.clearDiagnostics(uri);
    }
    /** Run one analysis immediately; stale responses are discarded. */
    async analyzeNow(uri, text) {
        const st = this.ensure(uri);
        const generation = ++st.generation;
        const run = this.client
            .analyzeFileText(text, uri)
            .then((response) => {
            if (st.generation !== generation) {
                return; // a newer edit superseded this request
            }
            const diags = toEditorDiagnostics(response.diagnostics);
            this.published.set(uri, diags);
            this.host.publishDiagnostics(uri, diags);
            this.host.setStatusWarning(null);
        })
            .catch((err) => {
            if (st.generation !== generation) {
                return;
            }
            // no stale diagnostics on failure, per contract
            this.published.delete(uri);
            this.host.clearDiagnostics(uri);
            const reason = err instanceof client_1.ServiceUnavailableError ? err.message : String(err);
            this.host.setStatusWarning(`vulnhunter: ${reason}`);
        });
        st.inflight = run;
        await run;
    }
    diagnosticsFor(uri) {
        return this.published.get(uri) ?? [];
    }
    /** Hover content for a 1-based line, or null off diagnostic lines. */
    hoverFor(uri, line) {
        const hit = this.diagnosticsFor(uri).find((d) => d.line === line);
        return hit ? hoverMarkdown(hit) : null;
    }
    /** Quick fix for a 1-based line when the payload carries a repair. */
    quickFixFor(uri, line) {
        const hit = this.diagnosticsFor(uri).find((d) => d.line === line);
        if (!hit || !hit.payload.repair) {
            return null;
        }
        return {
            title: `Apply vulnhunter repair for ${hit.payload.cwe_id}`,
            line: hit.payload.repair.target_line,
            replacement: hit.payload.repair.replacement,
        };
    }
    dispose() {
        for (const st of this.state.values()) {
            if (st.timer) {
                clearTimeout(st.timer);
            }
        }
        this.state.clear();
        this.published.clear();
    }
    ensure(uri) {
        let st = this.state.get(uri);
        if (!st) {
            st = { timer: null, generation: 0, inflight: null };
            this.state.set(uri, st);
        }
        return st;
    }
}
exports.AnalysisController = AnalysisController;
//# sourceMappingURL=analysis.js.map