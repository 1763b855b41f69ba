/**
 * VS Code glue: adapts the editor-agnostic AnalysisController onto the
 * extension API.  All intelligence lives server-side; this file only
 * forwards document text, renders diagnostics/hovers, and applies repair
 * edits (which re-trigger analysis through the change event).
 */

import * as vscode from 'vscode';
import { AnalysisController, EditorDiagnostic, Host } from './analysis';
import { ServiceClient } from './client';

function config() {
  const cfg = vscode.workspace.getConfiguration('vulnhunter');
  return {
    endpoint: cfg.get<string>('endpoint', 'http://127.0.0.1:8725'),
    debounceMs: Math.max(500, cfg.get<number>('debounceMs', 500)),
    languages: cfg.get<string[]>('languages', ['c', 'cpp']),
  };
}

const SEVERITY = {
  error: vscode.DiagnosticSeverity.Error,
  warning: vscode.DiagnosticSeverity.Warning,
  info: vscode.DiagnosticSeverity.Information,
} as const;

function toVscodeDiagnostic(doc: vscode.TextDocument, d: EditorDiagnostic): vscode.Diagnostic {
  const lineIndex = Math.max(0, Math.min(d.line - 1, doc.lineCount - 1));
  const range = doc.lineAt(lineIndex).range;
  const diag = new vscode.Diagnostic(range, d.message, SEVERITY[d.severity]);
  diag.source = 'vulnhunter';
  diag.code = d.payload.cwe_id;
  return diag;
}

export function activate(context: vscode.ExtensionContext): void {
  const { endpoint, debounceMs, languages } = config();
  const collection = vscode.languages.createDiagnosticCollection('vulnhunter');
  const status = vscode.window.createStatusBarItem(vscode.StatusBarAlignment.Left);
  context.subscriptions.push(collection, status);

  const docs = new Map<string, vscode.TextDocument>();
  const host: Host = {
    publishDiagnostics(uri, diagnostics) {
      const doc = docs.get(uri);
      if (!doc) {
        return;
      }
      collection.set(doc.uri, diagnostics.map((d) => toVscodeDiagnostic(doc, d)));
    },
    clearDiagnostics(uri) {
      const doc = docs.get(uri);
      if (doc) {
        collection.delete(doc.uri);
      }
    },
    setStatusWarning(message) {
      if (message) {
        status.text = `$(warning) ${message}`;
        status.show();
      } else {
        status.hide();
      }
    },
  };

  const controller = new AnalysisController(host, new ServiceClient(endpoint), debounceMs);
  context.subscriptions.push({ dispose: () => controller.dispose() });

  const relevant = (doc: vscode.TextDocument) => languages.includes(doc.languageId);
  const track = (doc: vscode.TextDocument) => {
    if (!relevant(doc)) {
      return;
    }
    docs.set(doc.uri.toString(), doc);
    controller.documentChanged(doc.uri.toString(), () => doc.getText());
  };

  context.subscriptions.push(
    vscode.workspace.onDidOpenTextDocument(track),
    vscode.workspace.onDidChangeTextDocument((e) => track(e.document)),
    vscode.workspace.onDidCloseTextDocument((doc) => {
      docs.delete(doc.uri.toString());
      controller.documentClosed(doc.uri.toString());
    }),
  );
  vscode.workspace.textDocuments.forEach(track);

  const selector = languages.map((language) => ({ language, scheme: 'file' }));

  context.subscriptions.push(
    vscode.languages.registerHoverProvider(selector, {
      provideHover(doc, position) {
        const md = controller.hoverFor(doc.uri.toString(), position.line + 1);
        return md ? new vscode.Hover(new vscode.MarkdownString(md)) : undefined;
      },
    }),
  );

  context.subscriptions.push(
    vscode.languages.registerCodeActionsProvider(
      selector,
      {
        provideCodeActions(doc, range) {
          const fix = controller.quickFixFor(doc.uri.toString(), range.start.line + 1);
          if (!fix) {
            return [];
          }
          const action = new vscode.CodeAction(fix.title, vscode.CodeActionKind.QuickFix);
          const lineIndex = fix.line - 1;
          action.edit = new vscode.WorkspaceEdit();
          action.edit.replace(doc.uri, doc.lineAt(lineIndex).range, fix.replacement);
          return [action];
        },
      },
      { providedCodeActionKinds: [vscode.CodeActionKind.QuickFix] },
    ),
  );
}

export function deactivate(): void {}
