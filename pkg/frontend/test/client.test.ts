import { afterEach, describe, expect, it } from 'vitest';

import { ServiceClient, ServiceUnavailableError } from '../src/client';
import { AnalyzeResponse } from '../src/types';
import { Fixture, StubService, loadFixture, startStub } from './stub_server';

const planted = loadFixture('analyze_planted');
const health = loadFixture('health');

let stub: StubService | null = null;

afterEach(async () => {
  if (stub) {
    await stub.close();
    stub = null;
  }
});

describe('ServiceClient', () => {
  it('fetches health with model hashes', async () => {
    stub = await startStub([planted]);
    const client = new ServiceClient(stub.url);
    const res = await client.health();
    expect(res.status).toBe('ok');
    expect(JSON.stringify(res)).toBe(health.body); // byte-exact replay
  });

  it('parses analyze responses', async () => {
    stub = await startStub([planted]);
    const client = new ServiceClient(stub.url);
    const res = await client.analyzeFileText(planted.request!.file_text!, 'x.c');
    expect(res.diagnostics).toHaveLength(1);
    expect(res.warnings).toEqual([]);
  });

  it('treats 422 (truncation) as success and keeps the results', async () => {
    const body = planted.body;
    const fixture: Fixture = { request: { file_text: 'long' }, status: 422, body };
    stub = await startStub([fixture]);
    const client = new ServiceClient(stub.url);
    const res: AnalyzeResponse = await client.analyzeFileText('long', 'x.c');
    expect(res.diagnostics).toHaveLength(1);
  });

  it('maps other error statuses to ServiceUnavailableError', async () => {
    stub = await startStub([]); // no fixtures: stub answers 404
    const client = new ServiceClient(stub.url);
    await expect(client.analyzeFileText('anything', 'x.c'))
      .rejects.toBeInstanceOf(ServiceUnavailableError);
  });

  it('maps connection failures to ServiceUnavailableError', async () => {
    const client = new ServiceClient('http://127.0.0.1:1', 300);
    await expect(client.analyzeFileText('x', 'x.c'))
      .rejects.toBeInstanceOf(ServiceUnavailableError);
  });
});
