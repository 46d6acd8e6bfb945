/** Three.js viewport: shows the current mesh payload with orbit controls and
 * a flat/smooth shading toggle.  Geometry buffers come straight from the
 * service payload; normals are the only thing computed locally.
 */

import * as THREE from "three";
import { decodeMesh } from "./wire.js";

export class MeshViewer {
  private readonly renderer: THREE.WebGLRenderer;
  private readonly scene = new THREE.Scene();
  private readonly camera: THREE.PerspectiveCamera;
  private mesh: THREE.Mesh | null = null;
  private material: THREE.MeshStandardMaterial;
  private orbit = { theta: 0.5, phi: 1.1, radius: 2.5, target: new THREE.Vector3() };
  private dragging = false;
  private lastPointer = { x: 0, y: 0 };

  constructor(private readonly canvas: HTMLCanvasElement) {
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.renderer.setPixelRatio(window.devicePixelRatio);
    this.camera = new THREE.PerspectiveCamera(40, 1, 0.01, 100);
    this.scene.background = new THREE.Color(0x181a1f);
    this.material = new THREE.MeshStandardMaterial({
      color: 0xc9a782,
      flatShading: false,
      side: THREE.DoubleSide,
    });
    const key = new THREE.DirectionalLight(0xffffff, 2.2);
    key.position.set(1.5, 1.5, 2.5);
    this.scene.add(key);
    const fill = new THREE.DirectionalLight(0x8899bb, 0.8);
    fill.position.set(-2, 0.5, -1.5);
    this.scene.add(fill);
    this.scene.add(new THREE.AmbientLight(0xffffff, 0.35));

    canvas.addEventListener("pointerdown", (e) => {
      this.dragging = true;
      this.lastPointer = { x: e.clientX, y: e.clientY };
      canvas.setPointerCapture(e.pointerId);
    });
    canvas.addEventListener("pointermove", (e) => {
      if (!this.dragging) return;
      const dx = e.clientX - this.lastPointer.x;
      const dy = e.clientY - this.lastPointer.y;
      this.lastPointer = { x: e.clientX, y: e.clientY };
      this.orbit.theta -= dx * 0.01;
      this.orbit.phi = Math.min(Math.PI - 0.05, Math.max(0.05, this.orbit.phi - dy * 0.01));
      this.render();
    });
    canvas.addEventListener("pointerup", () => {
      this.dragging = false;
    });
    canvas.addEventListener("wheel", (e) => {
      e.preventDefault();
      this.orbit.radius = Math.min(20, Math.max(0.2, this.orbit.radius * (1 + e.deltaY * 1e-3)));
      this.render();
    });
    new ResizeObserver(() => this.resize()).observe(canvas);
    this.resize();
  }

  setFlatShading(flat: boolean): void {
    this.material.flatShading = flat;
    this.material.needsUpdate = true;
    this.render();
  }

  /** Replace the displayed geometry with the payload's. */
  showPayload(payload: ArrayBuffer): void {
    const decoded = decodeMesh(payload);
    const geometry = new THREE.BufferGeometry();
    geometry.setAttribute("position", new THREE.BufferAttribute(decoded.vertices, 3));
    if (decoded.nFaces > 0) {
      geometry.setIndex(new THREE.BufferAttribute(decoded.indices, 1));
    }
    geometry.computeVertexNormals();
    geometry.computeBoundingSphere();
    if (this.mesh) {
      this.mesh.geometry.dispose();
      this.mesh.geometry = geometry;
    } else {
      this.mesh = new THREE.Mesh(geometry, this.material);
      this.scene.add(this.mesh);
      const sphere = geometry.boundingSphere;
      if (sphere) {
        this.orbit.target.copy(sphere.center);
        this.orbit.radius = Math.max(0.5, sphere.radius * 3);
      }
    }
    this.render();
  }

  private resize(): void {
    const width = this.canvas.clientWidth || 640;
    const height = this.canvas.clientHeight || 480;
    this.renderer.setSize(width, height, false);
    this.camera.aspect = width / height;
    this.camera.updateProjectionMatrix();
    this.render();
  }

  private render(): void {
    const { theta, phi, radius, target } = this.orbit;
    this.camera.position.set(
      target.x + radius * Math.sin(phi) * Math.sin(theta),
      target.y + radius * Math.cos(phi),
      target.z + radius * Math.sin(phi) * Math.cos(theta),
    );
    this.camera.lookAt(target);
    this.renderer.render(this.scene, this.camera);
  }
}

/** Tiny 2D wireframe thumbnail for grid cells (no WebGL context needed). */
export function drawThumbnail(canvas: HTMLCanvasElement, payload: ArrayBuffer): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { vertices, indices, nFaces } = decodeMesh(payload);
  const w = canvas.width;
  const h = canvas.height;
  ctx.clearRect(0, 0, w, h);
  let minX = Infinity, maxX = -Infinity, minY = Infinity, maxY = -Infinity;
  for (let i = 0; i < vertices.length; i += 3) {
    minX = Math.min(minX, vertices[i]);
    maxX = Math.max(maxX, vertices[i]);
    minY = Math.min(minY, vertices[i + 1]);
    maxY = Math.max(maxY, vertices[i + 1]);
  }
  const scale = 0.9 * Math.min(w / (maxX - minX || 1), h / (maxY - minY || 1));
  const px = (i: number) => (vertices[3 * i] - (minX + maxX) / 2) * scale + w / 2;
  const py = (i: number) => h / 2 - (vertices[3 * i + 1] - (minY + maxY) / 2) * scale;
  ctx.strokeStyle = "#7f9bbf";
  ctx.lineWidth = 0.5;
  ctx.beginPath();
  for (let f = 0; f < nFaces; f++) {
    const [a, b, c] = [indices[3 * f], indices[3 * f + 1], indices[3 * f + 2]];
    ctx.moveTo(px(a), py(a));
    ctx.lineTo(px(b), py(b));
    ctx.lineTo(px(c), py(c));
    ctx.closePath();
  }
  ctx.stroke();
}
