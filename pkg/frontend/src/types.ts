/**
 * Wire types for the local analysis service (schema_version 1).
 * Line numbers in payloads are 1-based file coordinates.
 */

export interface RepairPayload {
  replacement: string;
  target_line: number;
}

export interface DiagnosticPayload {
  schema_version: number;
  file: string;
  function_id: string | null;
  function_name: string;
  function_span: [number, number];
  top_lines: number[];
  p_vulnerable: number;
  line_scores: [number, number][];
  cwe_id: string;
  cwe_confidence: number;
  cwe_type: string;
  type_confidence: number;
  cvss: number;
  band: 'Low' | 'Medium' | 'High' | 'Critical';
  description: string;
  url: string;
  repair: RepairPayload | null;
  truncated: boolean;
}

export interface AnalyzeResponse {
  diagnostics: DiagnosticPayload[];
  warnings: string[];
}

export interface HealthResponse {
  status: string;
  model_hashes?: Record<string, string>;
  version?: string;
}
