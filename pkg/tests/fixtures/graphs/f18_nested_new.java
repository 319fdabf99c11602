import java.io.File;
public File child(String dir, String name) {
    File parent = new File(dir);
    File result = new File(parent, name.trim());
    return result;
}
