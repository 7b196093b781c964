export interface AudioLike {
  src: string;
  currentTime: number;
  play(): Promise<void> | void;
  pause(): void;
}

export type AudioFactory = (src: string) => AudioLike;

/**
 * A/B comparison player: holds the mixture and the extraction for the latest
 * result and toggles between them, preserving the playhead so the switch is
 * an honest side-by-side.
 */
export class AbPlayer {
  private mixture: AudioLike | null = null;
  private extraction: AudioLike | null = null;
  private active: "mixture" | "extraction" = "extraction";
  private playing = false;

  constructor(private readonly createAudio: AudioFactory) {}

  load(mixtureUrl: string, extractionUrl: string) {
    this.stop();
    this.mixture = this.createAudio(mixtureUrl);
    this.extraction = this.createAudio(extractionUrl);
    this.active = "extraction";
  }

  get loaded(): boolean {
    return this.mixture !== null && this.extraction !== null;
  }

  get current(): "mixture" | "extraction" {
    return this.active;
  }

  sources(): { mixture: string; extraction: string } | null {
    if (!this.mixture || !this.extraction) return null;
    return { mixture: this.mixture.src, extraction: this.extraction.src };
  }

  play() {
    const a = this.activeAudio();
    if (!a) return;
    this.playing = true;
    void a.play();
  }

  stop() {
    const a = this.activeAudio();
    if (a) {
      a.pause();
      a.currentTime = 0;
    }
    this.playing = false;
  }

  /** Switch between mixture and extraction at the same playhead position. */
  toggle() {
    if (!this.mixture || !this.extraction) return;
    const from = this.activeAudio()!;
    this.active = this.active === "mixture" ? "extraction" : "mixture";
    const to = this.activeAudio()!;
    to.currentTime = from.currentTime;
    if (this.playing) {
      from.pause();
      void to.play();
    }
  }

  private activeAudio(): AudioLike | null {
    return this.active === "mixture" ? this.mixture : this.extraction;
  }
}
