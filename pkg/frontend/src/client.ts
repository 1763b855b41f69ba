/**
 * HTTP client for the local analysis service.
 *
 * 422 responses carry full results (truncated-function analyses) and are
 * treated as success; anything else non-2xx, timeouts, and connection
 * failures surface as ServiceUnavailableError so the caller can degrade
 * gracefully.
 */

import { AnalyzeResponse, HealthResponse } from './types';

export class ServiceUnavailableError extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'ServiceUnavailableError';
  }
}

export class ServiceClient {
  constructor(
    private readonly endpoint: string,
    private readonly timeoutMs: number = 10_000,
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const controller = new AbortController();
    const timer = setTimeout(() => controller.abort(), this.timeoutMs);
    try {
      return await fetch(`${this.endpoint}${path}`, { ...init, signal: controller.signal });
    } catch (err) {
      throw new ServiceUnavailableError(
        `analysis service unreachable at ${this.endpoint}: ${String(err)}`,
      );
    } finally {
      clearTimeout(timer);
    }
  }

  async health(): Promise<HealthResponse> {
    const res = await this.request('/v1/health');
    return (await res.json()) as HealthResponse;
  }

  async analyzeFileText(fileText: string, file: string): Promise<AnalyzeResponse> {
    const res = await this.request('/v1/analyze', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ file_text: fileText, file }),
    });
    if (!res.ok && res.status !== 422) {
      throw new ServiceUnavailableError(`analysis service returned ${res.status}`);
    }
    return (await res.json()) as AnalyzeResponse;
  }
}
