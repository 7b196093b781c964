/** Trailing-edge debouncer: only the last call within the window fires. */
export class Debouncer {
  private handle: ReturnType<typeof setTimeout> | undefined;

  constructor(readonly delayMs: number = 150) {}

  schedule(op: () => void) {
    if (this.handle !== undefined) clearTimeout(this.handle);
    this.handle = setTimeout(() => {
      this.handle = undefined;
      op();
    }, this.delayMs);
  }

  cancel() {
    if (this.handle !== undefined) clearTimeout(this.handle);
    this.handle = undefined;
  }
}
