import java.io.File;
public void noop() {
}
