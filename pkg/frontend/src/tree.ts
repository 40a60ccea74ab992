// Dissection tree view model.  The tree rows mirror the server's dissection
// JSON nesting exactly; expansion defaults by depth and individual rows can
// be toggled away from that default.  Malformed tree JSON raises
// TreeFormatError so the renderer can show an error panel instead of a
// blank pane.

import type { TreeNode } from "./types.js";
import type { ByteRange } from "./hex.js";

export class TreeFormatError extends Error {}

/** Depth down to which rows start expanded (root and the structure list). */
export const DEFAULT_EXPAND_DEPTH = 2;

export interface TreeRow {
  /** Index path from the root, e.g. "r", "r.0", "r.0.2". */
  path: string;
  depth: number;
  label: string;
  decoded: string | null;
  offset: number;
  length: number;
  hasChildren: boolean;
  expanded: boolean;
  selected: boolean;
}

export function validateTree(raw: unknown): TreeNode {
  return validateNode(raw, "r");
}

function validateNode(raw: unknown, path: string): TreeNode {
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    throw new TreeFormatError(`node at ${path} is not an object`);
  }
  const node = raw as Record<string, unknown>;
  if (typeof node["label"] !== "string") {
    throw new TreeFormatError(`node at ${path} has no label`);
  }
  if (!Number.isInteger(node["offset"]) || (node["offset"] as number) < 0) {
    throw new TreeFormatError(`node at ${path} has a bad offset`);
  }
  if (!Number.isInteger(node["length"]) || (node["length"] as number) < 0) {
    throw new TreeFormatError(`node at ${path} has a bad length`);
  }
  if (!Array.isArray(node["children"])) {
    throw new TreeFormatError(`node at ${path} has no children array`);
  }
  if (node["decoded"] !== undefined && typeof node["decoded"] !== "string") {
    throw new TreeFormatError(`node at ${path} has a non-string decoding`);
  }
  const children = (node["children"] as unknown[]).map((child, i) =>
    validateNode(child, `${path}.${i}`),
  );
  return {
    label: node["label"] as string,
    offset: node["offset"] as number,
    length: node["length"] as number,
    children,
    ...(node["decoded"] !== undefined
      ? { decoded: node["decoded"] as string }
      : {}),
  };
}

function isExpanded(
  path: string,
  depth: number,
  toggled: ReadonlySet<string>,
): boolean {
  const byDefault = depth < DEFAULT_EXPAND_DEPTH;
  return toggled.has(path) ? !byDefault : byDefault;
}

/** Rows visible under the given toggle set, in document order. */
export function flattenTree(
  root: TreeNode,
  toggled: ReadonlySet<string>,
  selectedPath: string | null,
): TreeRow[] {
  const rows: TreeRow[] = [];
  const walk = (node: TreeNode, path: string, depth: number): void => {
    const expanded = isExpanded(path, depth, toggled);
    rows.push({
      path,
      depth,
      label: node.label,
      decoded: node.decoded ?? null,
      offset: node.offset,
      length: node.length,
      hasChildren: node.children.length > 0,
      expanded,
      selected: path === selectedPath,
    });
    if (expanded) {
      node.children.forEach((child, i) => walk(child, `${path}.${i}`, depth + 1));
    }
  };
  walk(root, "r", 0);
  return rows;
}

/** Byte range of the node at an index path; null when the path is invalid. */
export function nodeRange(root: TreeNode, path: string): ByteRange | null {
  const parts = path.split(".");
  if (parts[0] !== "r") return null;
  let node: TreeNode = root;
  for (const part of parts.slice(1)) {
    const index = Number.parseInt(part, 10);
    const child: TreeNode | undefined = node.children[index];
    if (child === undefined) return null;
    node = child;
  }
  return { offset: node.offset, length: node.length };
}
