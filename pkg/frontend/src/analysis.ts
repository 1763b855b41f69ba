/**
 * Editor-agnostic analysis plumbing: debounced latest-wins scheduling,
 * payload-to-diagnostic mapping, hover rendering, and quick-fix lookup.
 *
 * The extension entry point adapts this onto the VS Code API; tests drive
 * it against a fake host and a stub service.  All line numbers here stay
 * 1-based (service coordinates); the VS Code layer converts.
 */

import { ServiceClient, ServiceUnavailableError } from './client';
import { DiagnosticPayload } from './types';

export type EditorSeverity = 'error' | 'warning' | 'info';

export interface EditorDiagnostic {
  line: number; // 1-based
  severity: EditorSeverity;
  message: string;
  payload: DiagnosticPayload;
}

export interface QuickFix {
  title: string;
  line: number; // 1-based line the replacement applies to
  replacement: string;
}

/** The slice of the editor the controller needs to drive. */
export interface Host {
  publishDiagnostics(uri: string, diagnostics: EditorDiagnostic[]): void;
  clearDiagnostics(uri: string): void;
  setStatusWarning(message: string | null): void;
}

export function severityOf(band: DiagnosticPayload['band']): EditorSeverity {
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

export function toEditorDiagnostics(payloads: DiagnosticPayload[]): EditorDiagnostic[] {
  return payloads.map((p) => ({
    line: p.top_lines[0],
    severity: severityOf(p.band),
    message:
      `${p.cwe_id} (${p.cwe_type}): ${p.description} ` +
      `[severity ${p.cvss.toFixed(1)} ${p.band}]`,
    payload: p,
  }));
}

export function hoverMarkdown(diag: EditorDiagnostic): string {
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

interface PendingState {
  timer: ReturnType<typeof setTimeout> | null;
  generation: number;
  inflight: Promise<void> | null;
}

export class AnalysisController {
  private readonly state = new Map<string, PendingState>();
  private readonly published = new Map<string, EditorDiagnostic[]>();

  constructor(
    private readonly host: Host,
    private readonly client: ServiceClient,
    private readonly debounceMs: number = 500,
  ) {}

  /** Debounced entry point for open/edit events; latest edit wins. */
  documentChanged(uri: string, getText: () => string): void {
    const st = this.ensure(uri);
    if (st.timer !== null) {
      clearTimeout(st.timer);
    }
    st.timer = setTimeout(() => {
      st.timer = null;
      void this.analyzeNow(uri, getText());
    }, this.debounceMs);
  }

  documentClosed(uri: string): void {
    const st = this.state.get(uri);
    if (st?.timer) {
      clearTimeout(st.timer);
    }
    this.state.delete(uri);
    this.published.delete(uri);
    this.host.clearDiagnostics(uri);
  }

  /** Run one analysis immediately; stale responses are discarded. */
  async analyzeNow(uri: string, text: string): Promise<void> {
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
        const reason = err instanceof ServiceUnavailableError ? err.message : String(err);
        this.host.setStatusWarning(`vulnhunter: ${reason}`);
      });
    st.inflight = run;
    await run;
  }

  diagnosticsFor(uri: string): EditorDiagnostic[] {
    return this.published.get(uri) ?? [];
  }

  /** Hover content for a 1-based line, or null off diagnostic lines. */
  hoverFor(uri: string, line: number): string | null {
    const hit = this.diagnosticsFor(uri).find((d) => d.line === line);
    return hit ? hoverMarkdown(hit) : null;
  }

  /** Quick fix for a 1-based line when the payload carries a repair. */
  quickFixFor(uri: string, line: number): QuickFix | null {
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

  dispose(): void {
    for (const st of this.state.values()) {
      if (st.timer) {
        clearTimeout(st.timer);
      }
    }
    this.state.clear();
    this.published.clear();
  }

  private ensure(uri: string): PendingState {
    let st = this.state.get(uri);
    if (!st) {
      st = { timer: null, generation: 0, inflight: null };
      this.state.set(uri, st);
    }
    return st;
  }
}
